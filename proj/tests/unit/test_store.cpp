#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "thermospec/cli.hpp"
#include "thermospec/store.hpp"

using namespace thermospec;
namespace fs = std::filesystem;

namespace {
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> dir_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}
}  // namespace

TEST_CASE("store round trip and verify") {
  const fs::path dir = fs::temp_directory_path() / "thermospec_store_test";
  fs::remove_all(dir);
  ResultStore store(dir);

  const auto two = builtin_linear(2);
  const auto cert = make_bernoulli_cert(*two, {0, 1}, {0.25, 0.75});
  const std::string id = store.put_certificate(*cert);
  CHECK(id == cert->id());

  const auto back = store.get_certificate(id);
  CHECK(back->to_json() == cert->to_json());

  store.put_file("note.csv", "a,b\n1,2\n");
  store.write_manifest(R"({"cmd":"test"})");
  CHECK(store.verify().empty());

  // Tampering is detected.
  {
    std::ofstream out(dir / "certs" / (id + ".json"), std::ios::binary);
    std::string text = cert->to_json();
    const auto pos = text.find("\"h\":");
    text.replace(pos, 5, "\"h\":9");
    out << text;
  }
  ResultStore tampered(dir);
  CHECK_FALSE(tampered.verify().empty());
  fs::remove_all(dir);
}

TEST_CASE("csv and svg emission") {
  const auto csv = csv_table({"a", "b"}, {{"1", "2"}, {"3", "4"}});
  CHECK(csv == "a,b\n1,2\n3,4\n");
  const auto svg = svg_polyline({{0, 0}, {1, 1}}, "x", "y");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("cli produces byte-identical stores and verify passes") {
  const fs::path d1 = fs::temp_directory_path() / "thermospec_cli_store1";
  const fs::path d2 = fs::temp_directory_path() / "thermospec_cli_store2";
  fs::remove_all(d1);
  fs::remove_all(d2);

  const std::vector<std::string> base = {"spectrum", "be",      "--map", "linear:2",
                                         "--freq",   "0.3,0.7", "--out", "csv",
                                         "--seed",   "5"};
  auto run_into = [&](const fs::path& d) {
    auto args = base;
    args.push_back("--store");
    args.push_back(d.string());
    return run_cli(args);
  };
  CHECK(run_into(d1) == 0);
  CHECK(run_into(d2) == 0);
  CHECK(dir_contents(d1) == dir_contents(d2));

  CHECK(run_cli({"verify", "--store", d1.string()}) == 0);

  // Exit codes: config errors are 2, tampered stores are 3.
  CHECK(run_cli({"spectrum", "be", "--map", "nosuchmap", "--freq", "0.5,0.5"}) == 2);
  {
    std::ofstream out(d1 / "certs" / "deadbeef.json", std::ios::binary);
    out << "{}";
  }
  CHECK(run_cli({"verify", "--store", d1.string()}) == 3);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

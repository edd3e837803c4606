#include "thermospec/store.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace thermospec {

namespace fs = std::filesystem;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ResultStore::ResultStore(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_ / "certs");
}

std::string ResultStore::put_certificate(const Certificate& cert) {
  const std::string id = cert.id();
  const fs::path p = dir_ / "certs" / (id + ".json");
  if (!fs::exists(p)) {
    std::ofstream out(p, std::ios::binary);
    out << cert.to_json();
  }
  const std::string rel = "certs/" + id + ".json";
  if (std::find(files_.begin(), files_.end(), rel) == files_.end()) files_.push_back(rel);
  return id;
}

CertPtr ResultStore::get_certificate(const std::string& id) const {
  std::ifstream in(dir_ / "certs" / (id + ".json"), std::ios::binary);
  if (!in) throw InputError("certificate " + id + " not found in store");
  std::stringstream ss;
  ss << in.rdbuf();
  return Certificate::from_json(ss.str());
}

void ResultStore::put_file(const std::string& name, const std::string& content) {
  std::ofstream out(dir_ / name, std::ios::binary);
  out << content;
  if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
}

void ResultStore::write_manifest(const std::string& config_json) {
  nlohmann::json j;
  j["library"] = "thermospec";
  j["version"] = "0.1.0";
  std::ostringstream hash;
  hash << std::hex << fnv1a(config_json);
  j["config_hash"] = hash.str();
  j["config"] = nlohmann::json::parse(config_json);
  std::sort(files_.begin(), files_.end());
  j["files"] = files_;
  const char* ts = std::getenv("THERMOSPEC_TIMESTAMPS");
  if (ts && std::string(ts) == "1") {
    j["timestamp"] = static_cast<std::int64_t>(std::time(nullptr));
  } else {
    j["timestamp"] = nullptr;  // byte-identical reruns by default
  }
  std::ofstream out(dir_ / "manifest.json", std::ios::binary);
  out << j.dump(2);
}

namespace {

void verify_cert(const Certificate& c, const std::string& id, std::vector<std::string>& bad) {
  auto complain = [&](const std::string& msg) { bad.push_back(id + ": " + msg); };
  switch (c.type) {
    case Certificate::Type::kMarkov: {
      if (c.edges.size() != c.states.size() || c.stationary.size() != c.states.size()) {
        complain("inconsistent state/kernel sizes");
        return;
      }
      double h = 0.0, chi_est = 0.0, chi_lo = 0.0, chi_hi = 0.0;
      for (size_t i = 0; i < c.edges.size(); ++i) {
        double row = 0.0;
        for (const CertEdge& e : c.edges[i]) {
          row += e.prob;
          const double mass = c.stationary[i] * e.prob;
          if (e.prob > 0) h -= mass * std::log(e.prob);
          chi_est += mass * e.logfp_est;
          chi_lo += mass * e.logfp_lo;
          chi_hi += mass * e.logfp_hi;
          if (e.logfp_est < e.logfp_lo - 1e-12 || e.logfp_est > e.logfp_hi + 1e-12)
            complain("edge log|f'| estimate escapes its bracket");
        }
        if (std::abs(row - 1.0) > 1e-12) complain("kernel row does not sum to 1");
      }
      if (std::abs(h - c.h) > 1e-9 * std::max(1.0, std::abs(c.h)))
        complain("entropy does not recompute from the kernel");
      if (std::abs(chi_est - c.chi.est) > 1e-9 * std::max(1.0, std::abs(c.chi.est)))
        complain("lyapunov estimate does not recompute");
      if (chi_lo > c.chi.hi + 1e-9 || chi_hi < c.chi.lo - 1e-9)
        complain("lyapunov bracket inconsistent");
      double res = 0.0;
      std::vector<double> q(c.stationary.size(), 0.0);
      for (size_t i = 0; i < c.edges.size(); ++i)
        for (const CertEdge& e : c.edges[i]) q[e.target] += c.stationary[i] * e.prob;
      for (size_t i = 0; i < q.size(); ++i)
        res = std::max(res, std::abs(q[i] - c.stationary[i]));
      if (res > 1e-10) complain("stationarity residual above 1e-10");
      if (c.chi.est > 0) {
        const double dim = std::min(1.0, std::max(0.0, c.h / c.chi.est));
        if (std::abs(dim - c.dim.est) > 1e-8) complain("dimension does not recompute");
      }
      break;
    }
    case Certificate::Type::kPeriodic: {
      // Orbit closure can be rechecked when the base map is reconstructible.
      try {
        const auto map = map_by_name(c.map_name);
        double x = c.orbit.at(0);
        for (Symbol s : c.periodic_word) x = map->branch(s).forward(x);
        if (std::abs(x - c.orbit[0]) > 1e-9) complain("periodic orbit fails to close");
        double chi = 0.0;
        for (size_t j = 0; j < c.periodic_word.size(); ++j)
          chi += std::log(std::abs(map->branch(c.periodic_word[j]).dforward(c.orbit[j])));
        chi /= static_cast<double>(c.periodic_word.size());
        if (std::abs(chi - c.chi.est) > 1e-8) complain("periodic lyapunov does not recompute");
      } catch (const InputError&) {
        // Induced or custom base: the stored data is self-consistent only.
      }
      if (c.h != 0.0) complain("periodic orbit with nonzero entropy");
      break;
    }
    case Certificate::Type::kMixture:
    case Certificate::Type::kProjected: {
      double w = 0.0, h = 0.0, chi = 0.0;
      for (const auto& [wt, comp] : c.components) {
        w += wt;
        h += wt * comp->h;
        chi += wt * comp->chi.est;
      }
      if (c.type == Certificate::Type::kMixture) {
        if (std::abs(w - 1.0) > 1e-12) complain("mixture weights do not sum to 1");
        if (std::abs(h - c.h) > 1e-9) complain("mixture entropy is not affine");
        if (std::abs(chi - c.chi.est) > 1e-9) complain("mixture lyapunov is not affine");
      } else {
        if (c.tau_mean <= 0) complain("projected certificate with nonpositive mean return");
        if (std::abs(h / c.tau_mean - c.h) > 1e-9)
          complain("projected entropy is not h~ / tau");
        if (std::abs(chi / c.tau_mean - c.chi.est) > 1e-9)
          complain("projected lyapunov is not chi~ / tau");
      }
      if (c.chi.est > 0) {
        const double dim = std::min(1.0, std::max(0.0, c.h / c.chi.est));
        if (std::abs(dim - c.dim.est) > 1e-8) complain("dimension does not recompute");
      }
      break;
    }
  }
}

}  // namespace

std::vector<std::string> ResultStore::verify() const {
  std::vector<std::string> bad;
  const fs::path certs = dir_ / "certs";
  if (fs::exists(certs)) {
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(certs)) paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
      std::ifstream in(p, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      CertPtr c;
      try {
        c = Certificate::from_json(ss.str());
      } catch (const std::exception& e) {
        bad.push_back(p.filename().string() + ": unparseable (" + e.what() + ")");
        continue;
      }
      const std::string id = p.stem().string();
      if (c->id() != id) bad.push_back(id + ": content hash mismatch");
      verify_cert(*c, id, bad);
    }
  }
  const fs::path mf = dir_ / "manifest.json";
  if (fs::exists(mf)) {
    std::ifstream in(mf, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      const auto j = nlohmann::json::parse(ss.str());
      std::ostringstream hash;
      hash << std::hex << fnv1a(j.at("config").dump());
      if (j.at("config_hash").get<std::string>() != hash.str())
        bad.push_back("manifest: config hash mismatch");
      for (const auto& f : j.at("files")) {
        if (!fs::exists(dir_ / f.get<std::string>()))
          bad.push_back("manifest: missing file " + f.get<std::string>());
      }
    } catch (const std::exception& e) {
      bad.push_back(std::string("manifest unparseable: ") + e.what());
    }
  }
  return bad;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream os;
  for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
  return os.str();
}

std::string svg_polyline(const std::vector<std::pair<double, double>>& points,
                         const std::string& x_label, const std::string& y_label) {
  const int w = 640, h = 420, m = 50;
  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  for (const auto& [x, y] : points) {
    xlo = std::min(xlo, x);
    xhi = std::max(xhi, x);
    ylo = std::min(ylo, y);
    yhi = std::max(yhi, y);
  }
  if (points.empty()) {
    xlo = ylo = 0;
    xhi = yhi = 1;
  }
  if (xhi - xlo < 1e-12) xhi = xlo + 1;
  if (yhi - ylo < 1e-12) yhi = ylo + 1;
  auto px = [&](double x) { return m + (x - xlo) / (xhi - xlo) * (w - 2 * m); };
  auto py = [&](double y) { return h - m - (y - ylo) / (yhi - ylo) * (h - 2 * m); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << m << "\" y1=\"" << h - m << "\" x2=\"" << w - m << "\" y2=\""
     << h - m << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << h - m
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"" << h - 12 << "\" font-size=\"12\">" << x_label
     << "</text>\n";
  os << "<text x=\"12\" y=\"" << h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12,"
     << h / 2 << ")\">" << y_label << "</text>\n";
  os << "<text x=\"" << m << "\" y=\"" << h - m + 16 << "\" font-size=\"10\">"
     << format_double(xlo) << "</text>\n";
  os << "<text x=\"" << w - m - 40 << "\" y=\"" << h - m + 16 << "\" font-size=\"10\">"
     << format_double(xhi) << "</text>\n";
  os << "<text x=\"" << m - 44 << "\" y=\"" << h - m << "\" font-size=\"10\">"
     << format_double(ylo) << "</text>\n";
  os << "<text x=\"" << m - 44 << "\" y=\"" << m + 4 << "\" font-size=\"10\">"
     << format_double(yhi) << "</text>\n";
  os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (const auto& [x, y] : points) os << px(x) << "," << py(y) << " ";
  os << "\"/>\n</svg>\n";
  return os.str();
}

}  // namespace thermospec

#include "thermospec/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "thermospec/fuchsian.hpp"
#include "thermospec/spectra.hpp"
#include "thermospec/store.hpp"

namespace thermospec {

namespace {

std::vector<Observable> parse_observables(const std::string& spec) {
  std::vector<Observable> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    if (tok == "b1")
      out.push_back(Observable::digit_value());
    else if (tok == "logfp")
      out.push_back(Observable::log_derivative());
    else if (tok.rfind("ind:", 0) == 0)
      out.push_back(Observable::indicator(std::stoll(tok.substr(4))));
    else
      throw InputError("unknown observable spec: " + tok +
                       " (use b1, logfp, or ind:<symbol>)");
  }
  if (out.empty()) throw InputError("empty observable list");
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

std::pair<Symbol, Symbol> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw InputError("range must be LO:HI");
  return {std::stoll(s.substr(0, colon)), std::stoll(s.substr(colon + 1))};
}

// Subalphabet as LO:HI or an explicit comma list.
std::vector<Symbol> parse_symbols(const std::string& s, const MarkovMap& map) {
  std::vector<Symbol> out;
  if (s.find(':') != std::string::npos) {
    const auto [lo, hi] = parse_range(s);
    for (Symbol v = lo; v <= hi; ++v)
      if (map.has_branch(v)) out.push_back(v);
  } else {
    for (Symbol v : word_from_string(s))
      if (map.has_branch(v)) out.push_back(v);
  }
  if (out.empty()) throw InputError("subalphabet " + s + " matches no branches");
  return out;
}

Schedule load_schedule(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw InputError("cannot open schedule file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Schedule::from_json(ss.str());
}

Backend parse_backend(const std::string& s) {
  if (s == "legendre") return Backend::kLegendre;
  if (s == "direct") return Backend::kDirect;
  if (s == "both") return Backend::kBoth;
  throw InputError("backend must be legendre | direct | both");
}

struct OutputSink {
  std::string format = "json";  // json | csv
  std::string plot_path;
  std::optional<ResultStore> store;
  nlohmann::json config;

  void emit_rows(const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows, const nlohmann::json& j,
                 const std::vector<std::pair<double, double>>& plot_points,
                 const std::string& table_name) {
    if (format == "csv")
      std::cout << csv_table(header, rows);
    else
      std::cout << j.dump(2) << "\n";
    if (!plot_path.empty())
      std::ofstream(plot_path, std::ios::binary)
          << svg_polyline(plot_points, "alpha", "dim_lo");
    if (store) {
      store->put_file(table_name + ".csv", csv_table(header, rows));
      store->put_file(table_name + ".json", j.dump(2));
      if (!plot_path.empty())
        store->put_file(table_name + ".svg", svg_polyline(plot_points, "alpha", "dim_lo"));
    }
  }

  std::string stash_witness(const CertPtr& cert) {
    if (!cert) return "";
    if (store) return store->put_certificate(*cert);
    return cert->id();
  }

  void finalize() {
    if (store) store->write_manifest(config.dump());
  }
};

nlohmann::json spectrum_json(const SpectrumResult& r, const std::string& witness_id) {
  nlohmann::json j;
  j["feasible"] = r.feasible;
  j["exact"] = r.exact;
  j["value"] = r.value;
  j["dim_lo"] = r.lower_bound;
  j["dim_lo_est"] = r.lower_bound_est;
  j["beta_floor_applied"] = r.beta_floor_applied;
  j["beta_floor"] = r.beta_floor;
  j["bracket_width"] = r.bracket_width;
  j["converged"] = r.converged;
  j["provenance"] = r.provenance;
  j["witness_id"] = witness_id;
  j["witness_count"] = r.witnesses.size();
  return j;
}

std::vector<std::string> spectrum_row(const std::vector<double>& alphas,
                                      const SpectrumResult& r,
                                      const std::string& witness_id) {
  std::vector<std::string> row;
  for (double a : alphas) row.push_back(format_double(a));
  row.push_back(format_double(r.lower_bound));
  row.push_back(r.exact ? format_double(r.value)
                        : "nan");  // upper bounds are out of certification scope
  row.push_back(r.beta_floor_applied ? "1" : "0");
  row.push_back(witness_id.empty() ? "-" : witness_id);
  row.push_back(format_double(r.bracket_width));
  return row;
}

std::vector<std::string> spectrum_header(size_t k) {
  std::vector<std::string> h;
  for (size_t i = 0; i < k; ++i) h.push_back("alpha" + std::to_string(i + 1));
  h.insert(h.end(), {"dim_lo", "dim_hi_or_nan", "beta_floor_applied", "witness_id",
                     "bracket_width"});
  return h;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"dimension spectra for countable-branch Markov maps"};
  app.require_subcommand(1);

  std::string map_spec = "renyi", obs_spec = "b1", schedule_path, backend_spec = "legendre";
  std::string out_format = "json", plot_path, store_dir, group_path, alpha_spec, freq_spec;
  std::string word_spec, range_spec = "1:10", entries_spec;
  unsigned seed = 0;
  int workers = 0;

  app.add_option("--workers", workers, "worker threads (default: all cores)");

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--store", store_dir, "result store directory");
    cmd->add_option("--seed", seed, "RNG seed (default 0)");
    cmd->add_option("--out", out_format, "output format: json | csv");
    cmd->add_option("--plot", plot_path, "write a polyline SVG to this path");
  };

  // map ------------------------------------------------------------------
  auto* cmd_map = app.add_subcommand("map", "describe and validate a map");
  cmd_map->add_option("--map", map_spec, "renyi|gauss|farey|linear:b|custom:file");
  cmd_map->add_option("--alphabet", range_spec, "probe subalphabet LO:HI");
  std::string cyl_word, code_x;
  int code_n = 8;
  cmd_map->add_option("--cylinder", cyl_word, "cylinder of a comma-separated word");
  cmd_map->add_option("--code", code_x, "code a point");
  cmd_map->add_option("--n", code_n, "coding length");
  add_common(cmd_map);

  // thermo ----------------------------------------------------------------
  auto* cmd_thermo = app.add_subcommand("thermo", "pressure / equilibria / bowen roots");
  auto* th_press = cmd_thermo->add_subcommand("pressure");
  auto* th_bowen = cmd_thermo->add_subcommand("bowen");
  double beta = 1.0;
  int depth = 2;
  for (auto* c : {th_press, th_bowen}) {
    c->add_option("--map", map_spec);
    c->add_option("--alphabet", range_spec, "subalphabet LO:HI");
    c->add_option("--depth", depth);
    add_common(c);
  }
  th_press->add_option("--beta", beta, "geometric potential coefficient");

  // induce ----------------------------------------------------------------
  auto* cmd_induce = app.add_subcommand("induce", "jump transforms");
  auto* in_build = cmd_induce->add_subcommand("build");
  auto* in_bowen = cmd_induce->add_subcommand("bowen");
  std::string scheme_path, jump_spec = "24:8";
  for (auto* c : {in_build, in_bowen}) {
    c->add_option("--scheme", scheme_path, "scheme description JSON file");
    c->add_option("--renyi-jump", jump_spec, "KMAX:AMAX renyi jump scheme");
    add_common(c);
  }
  in_bowen->add_option("--alphabet", range_spec, "base subalphabet LO:HI");
  std::string cells_spec = "1e-2,3e-3";
  in_bowen->add_option("--cells", cells_spec, "cell-size schedule");

  // spectrum ----------------------------------------------------------------
  auto* cmd_spec = app.add_subcommand("spectrum", "dimension spectra");
  auto* sp_birk = cmd_spec->add_subcommand("birkhoff");
  auto* sp_lyap = cmd_spec->add_subcommand("lyapunov");
  auto* sp_be = cmd_spec->add_subcommand("be");
  auto* sp_flat = cmd_spec->add_subcommand("flat");
  auto* sp_edig = cmd_spec->add_subcommand("edigits");
  auto* sp_sample = cmd_spec->add_subcommand("sample");
  std::string freq_head_spec, grid_spec, nrange_spec = "3:8";
  double tail_mass = 0.0, flat_alpha = 2.5;
  int jmax = 4;
  std::int64_t sample_n = 100000;
  int sample_seeds = 100;
  for (auto* c : {sp_birk, sp_lyap, sp_be, sp_flat, sp_edig, sp_sample}) {
    c->add_option("--map", map_spec);
    c->add_option("--schedule", schedule_path, "schedule JSON file");
    c->add_option("--backend", backend_spec, "legendre | direct | both");
    add_common(c);
  }
  sp_birk->add_option("--obs", obs_spec, "observables: b1,ind:K,logfp");
  sp_birk->add_option("--alpha", alpha_spec, "targets, one per observable");
  sp_lyap->add_option("--alpha", alpha_spec, "Lyapunov targets");
  sp_lyap->add_option("--grid", grid_spec, "LO:HI:COUNT target grid");
  sp_be->add_option("--freq", freq_spec, "frequency vector head");
  sp_be->add_option("--freq-head", freq_head_spec, "frequency vector head");
  sp_be->add_option("--tail", tail_mass, "declared tail mass");
  sp_flat->add_option("--alpha", flat_alpha, "digit-mean target (>= 2, inf allowed)");
  sp_flat->add_option("--jmax", jmax);
  sp_edig->add_option("--n", nrange_spec, "digit bound N or range LO:HI");
  sp_sample->add_option("--obs", obs_spec);
  sp_sample->add_option("--n", sample_n, "orbit length");
  sp_sample->add_option("--seeds", sample_seeds, "number of random starts");

  // top-level sample alias ---------------------------------------------------
  auto* cmd_sample = app.add_subcommand("sample", "empirical Birkhoff means");
  cmd_sample->add_option("--map", map_spec);
  cmd_sample->add_option("--obs", obs_spec);
  cmd_sample->add_option("--n", sample_n);
  cmd_sample->add_option("--seeds", sample_seeds);
  add_common(cmd_sample);

  // fuchsian ----------------------------------------------------------------
  auto* cmd_fuchs = app.add_subcommand("fuchsian", "Bowen-Series machinery");
  auto* fx_build = cmd_fuchs->add_subcommand("build");
  auto* fx_blocks = cmd_fuchs->add_subcommand("blocks");
  auto* fx_spec = cmd_fuchs->add_subcommand("spectrum");
  auto* fx_freq = cmd_fuchs->add_subcommand("frequency");
  int cutoff = 32;
  for (auto* c : {fx_build, fx_blocks, fx_spec, fx_freq}) {
    c->add_option("--group", group_path, "generator JSON file (default example if omitted)");
    c->add_option("--schedule", schedule_path);
    add_common(c);
  }
  fx_blocks->add_option("--word", word_spec, "comma-separated generator indices");
  fx_spec->add_option("--alpha", alpha_spec, "winding means, one per cusp");
  fx_spec->add_option("--cutoff", cutoff, "winding truncation");
  fx_freq->add_option("--entries", entries_spec, "winding:cusp:freq triples");
  fx_freq->add_option("--tail", tail_mass);
  fx_freq->add_option("--cutoff", cutoff);

  // verify  ----------------------------------------------------------------
  auto* cmd_verify = app.add_subcommand("verify", "re-check a result store");
  cmd_verify->add_option("--store", store_dir, "store directory")->required();

  std::vector<std::string> argv = args;
  std::vector<const char*> cargv;
  cargv.push_back("thermospec");
  for (const auto& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help() << std::flush;
      return 0;
    }
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  if (workers > 0) setenv("THERMOSPEC_WORKERS", std::to_string(workers).c_str(), 1);

  OutputSink sink;
  sink.format = out_format;
  sink.plot_path = plot_path;
  if (!store_dir.empty()) sink.store.emplace(store_dir);
  // The store location is not part of the semantic config: identical
  // config+seed must produce byte-identical stores wherever they land.
  std::vector<std::string> config_args;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--store") {
      ++i;
      continue;
    }
    config_args.push_back(args[i]);
  }
  sink.config["args"] = config_args;
  sink.config["seed"] = seed;

  int rc = 0;
  try {
    if (cmd_map->parsed()) {
      const auto map = map_by_name(map_spec);
      nlohmann::json j;
      j["name"] = map->name();
      j["fully_branched"] = map->fully_branched();
      const std::vector<Symbol> probe = parse_symbols(range_spec, *map);
      j["warnings"] = map->validate(probe);
      nlohmann::json branches = nlohmann::json::array();
      for (Symbol s : probe) {
        const Branch& b = map->branch(s);
        branches.push_back({{"symbol", s},
                            {"domain", {b.domain.lo, b.domain.hi}},
                            {"inf_abs_dfdx", map->inf_abs_derivative(s)},
                            {"sup_abs_dfdx", map->sup_abs_derivative(s)}});
      }
      j["branches"] = branches;
      for (const auto& [a, x] : map->neutral()) j["neutral"].push_back({a, x});
      if (!cyl_word.empty()) {
        const auto c = cylinder(*map, word_from_string(cyl_word));
        j["cylinder"] = {{"word", cyl_word},
                         {"box", {c.box.lo, c.box.hi}},
                         {"diameter", c.diameter()},
                         {"exact", c.exact()}};
      }
      if (!code_x.empty()) {
        const auto c = code(*map, std::stod(code_x), code_n);
        j["code"] = {{"x", std::stod(code_x)}, {"word", c.word}};
      }
      std::cout << j.dump(2) << "\n";
    } else if (th_press->parsed() || th_bowen->parsed()) {
      const auto map = map_by_name(map_spec);
      const auto sub = parse_symbols(range_spec, *map);
      const auto sys = build_subsystem(map, sub, depth);
      nlohmann::json j;
      if (th_press->parsed()) {
        const auto pv = pressure(sys, PotentialSpec::geometric(beta));
        j["P"] = {pv.P.lo, pv.P.hi};
        j["P_est"] = pv.P_est;
        j["lambda"] = pv.lambda;
        j["iters"] = pv.iterations;
        j["residual"] = pv.residual;
        j["restricted_to_dominant_scc"] = pv.restricted_to_dominant_scc;
      } else {
        const auto root = bowen_root(sys);
        j["t"] = {root.t.lo, root.t.hi};
        j["t_est"] = root.est;
        j["pressure_evals"] = root.pressure_evals;
      }
      std::cout << j.dump(2) << "\n";
      if (sink.store) sink.store->put_file("thermo.json", j.dump(2));
    } else if (in_build->parsed() || in_bowen->parsed()) {
      if (in_build->parsed()) {
        InducingScheme sch;
        if (!scheme_path.empty()) {
          std::ifstream in(scheme_path);
          if (!in) throw InputError("cannot open scheme file " + scheme_path);
          std::stringstream ss;
          ss << in.rdbuf();
          sch = scheme_from_json(ss.str());
        } else {
          const auto [kmax, amax] = parse_range(jump_spec);
          sch = renyi_jump_scheme(static_cast<int>(kmax), amax);
        }
        nlohmann::json j;
        j["base"] = sch.base->name();
        j["patterns"] = sch.patterns.size();
        j["fully_branched"] = sch.fully_branched;
        j["transcript"] = sch.transcript;
        j["scheme"] = nlohmann::json::parse(sch.to_json());
        const auto dist = estimate_distortion_constant(sch);
        j["distortion_sampled"] = dist.sampled;
        if (dist.closed_form) j["distortion_closed_form"] = *dist.closed_form;
        std::cout << j.dump(2) << "\n";
        if (sink.store) sink.store->put_file("scheme.json", j.dump(2));
      } else {
        const auto base_map = map_by_name(map_spec);
        const auto sub = parse_symbols(range_spec, *base_map);
        ParabolicRootOptions opts;
        opts.cell_sizes = parse_doubles(cells_spec);
        const auto root = parabolic_bowen_root(base_map, sub, opts);
        nlohmann::json j;
        j["t"] = {root.t.lo, root.t.hi};
        j["t_est"] = root.est;
        j["exact_zero"] = root.exact_zero;
        for (const auto& lvl : root.levels)
          j["levels"].push_back({{"cell_size", lvl.cell_size},
                                 {"t", {lvl.t.lo, lvl.t.hi}},
                                 {"t_est", lvl.est},
                                 {"cells", lvl.cells}});
        std::cout << j.dump(2) << "\n";
        if (sink.store) sink.store->put_file("induce_bowen.json", j.dump(2));
      }
    } else if (sp_birk->parsed()) {
      SpectrumQuery q;
      q.map = map_by_name(map_spec);
      q.observables = parse_observables(obs_spec);
      q.targets = parse_doubles(alpha_spec);
      q.schedule = load_schedule(schedule_path);
      q.backend = parse_backend(backend_spec);
      q.seed = seed;
      const auto r = birkhoff_spectrum(q);
      const std::string wid = sink.stash_witness(r.best_witness);
      sink.emit_rows(spectrum_header(q.targets.size()),
                     {spectrum_row(q.targets, r, wid)}, spectrum_json(r, wid),
                     {{q.targets.empty() ? 0.0 : q.targets[0], r.lower_bound}}, "birkhoff");
      if (!r.converged) rc = 4;
    } else if (sp_lyap->parsed()) {
      const auto map = map_by_name(map_spec);
      const Schedule sched = load_schedule(schedule_path);
      std::vector<double> alphas = parse_doubles(alpha_spec);
      if (!grid_spec.empty()) {
        std::stringstream ss(grid_spec);
        std::string tok;
        std::vector<double> g;
        while (std::getline(ss, tok, ':')) g.push_back(std::stod(tok));
        if (g.size() != 3) throw InputError("--grid needs LO:HI:COUNT");
        for (int i = 0; i < static_cast<int>(g[2]); ++i)
          alphas.push_back(g[0] + (g[1] - g[0]) * i / std::max(1.0, g[2] - 1));
      }
      if (alphas.empty()) throw InputError("lyapunov needs --alpha or --grid");
      std::vector<std::vector<std::string>> rows;
      std::vector<std::pair<double, double>> pts;
      nlohmann::json jrows = nlohmann::json::array();
      bool conv = true;
      for (double a : alphas) {
        const auto r = lyapunov_spectrum(map, a, sched, parse_backend(backend_spec), seed);
        const std::string wid = sink.stash_witness(r.best_witness);
        rows.push_back(spectrum_row({a}, r, wid));
        jrows.push_back(spectrum_json(r, wid));
        pts.emplace_back(a, r.lower_bound);
        conv = conv && r.converged;
      }
      sink.emit_rows(spectrum_header(1), rows, jrows, pts, "lyapunov");
      if (!conv) rc = 4;
    } else if (sp_be->parsed()) {
      FrequencyVector freq;
      freq.head = parse_doubles(freq_spec.empty() ? freq_head_spec : freq_spec);
      freq.tail = tail_mass;
      const auto r = besicovitch_eggleston(map_by_name(map_spec), freq,
                                           load_schedule(schedule_path),
                                           parse_backend(backend_spec), seed);
      const std::string wid = sink.stash_witness(r.best_witness);
      sink.emit_rows(spectrum_header(freq.head.size()), {spectrum_row(freq.head, r, wid)},
                     spectrum_json(r, wid),
                     {{freq.head.empty() ? 0.0 : freq.head[0], r.lower_bound}}, "be");
      if (!r.converged) rc = 4;
    } else if (sp_flat->parsed()) {
      const auto r = flat_spectrum_witnesses(flat_alpha, jmax, seed);
      nlohmann::json j;
      std::vector<std::vector<std::string>> rows;
      for (const auto& w : r.witnesses) {
        const std::string nid = sink.stash_witness(w.nu);
        const std::string mid = sink.stash_witness(w.mu);
        j["witnesses"].push_back({{"j", w.j},
                                  {"p", w.p},
                                  {"t", w.t},
                                  {"b1_integral", w.b1_integral},
                                  {"b1_target", w.b1_target},
                                  {"dim_nu", w.dim_nu},
                                  {"dim_mu", w.dim_mu},
                                  {"nu_id", nid},
                                  {"mu_id", mid}});
        rows.push_back({std::to_string(w.j), format_double(w.b1_target),
                        format_double(w.b1_integral), format_double(w.dim_nu), nid});
      }
      sink.emit_rows({"j", "b1_target", "b1_integral", "dim_nu", "witness_id"}, rows, j, {},
                     "flat");
    } else if (sp_edig->parsed()) {
      std::vector<int> ns;
      if (nrange_spec.find(':') != std::string::npos) {
        const auto [lo, hi] = parse_range(nrange_spec);
        for (Symbol n = lo; n <= hi; ++n) ns.push_back(static_cast<int>(n));
      } else {
        ns.push_back(std::stoi(nrange_spec));
      }
      nlohmann::json j = nlohmann::json::array();
      std::vector<std::vector<std::string>> rows;
      std::vector<std::pair<double, double>> pts;
      for (int n : ns) {
        const auto r = bounded_digit_dimension(n);
        j.push_back({{"n", n}, {"t", {r.t.lo, r.t.hi}}, {"t_est", r.est}});
        rows.push_back({std::to_string(n), format_double(r.t.lo), format_double(r.est),
                        format_double(r.t.hi)});
        pts.emplace_back(n, r.est);
      }
      sink.emit_rows({"n", "t_lo", "t_est", "t_hi"}, rows, j, pts, "edigits");
    } else if (sp_sample->parsed() || cmd_sample->parsed()) {
      const auto map = map_by_name(map_spec);
      const auto obs = parse_observables(obs_spec);
      const auto s = sample_birkhoff(map, obs, sample_n, sample_seeds, seed);
      nlohmann::json j;
      std::vector<std::vector<std::string>> rows;
      for (size_t c = 0; c < obs.size(); ++c) {
        double min_min = std::numeric_limits<double>::infinity();
        double max_max = -min_min;
        for (const auto& series : s.series[c]) {
          min_min = std::min(min_min, series.running_min_mean);
          max_max = std::max(max_max, series.running_max_mean);
        }
        j[obs[c].name] = {{"median_final", s.median_final[c]},
                          {"q1_final", s.q1_final[c]},
                          {"q3_final", s.q3_final[c]},
                          {"min_running_mean", min_min},
                          {"max_running_mean", max_max}};
        rows.push_back({obs[c].name, format_double(s.q1_final[c]),
                        format_double(s.median_final[c]), format_double(s.q3_final[c])});
      }
      sink.emit_rows({"observable", "q1", "median", "q3"}, rows, j, {}, "sample");
    } else if (cmd_fuchs->parsed()) {
      GeneratorSet gens;
      if (group_path.empty()) {
        gens = GeneratorSet::default_example();
      } else {
        std::ifstream in(group_path);
        if (!in) throw InputError("cannot open group file " + group_path);
        std::stringstream ss;
        ss << in.rdbuf();
        gens = GeneratorSet::from_json(ss.str());
      }
      const auto bs = build_bowen_series(gens);
      if (fx_build->parsed()) {
        if (out_format == "csv")
          std::cout << bs.arcs_csv();
        else {
          nlohmann::json j;
          j["generators"] = gens.gens.size();
          j["cusps"] = gens.num_cusps;
          j["transcript"] = bs.transcript;
          nlohmann::json arcs = nlohmann::json::array();
          for (size_t i = 0; i < bs.arcs.size(); ++i)
            arcs.push_back({{"symbol", i}, {"lo", bs.arcs[i].lo}, {"hi", bs.arcs[i].hi}});
          j["arcs"] = arcs;
          std::cout << j.dump(2) << "\n";
        }
        if (sink.store) sink.store->put_file("arcs.csv", bs.arcs_csv());
      } else if (fx_blocks->parsed()) {
        std::vector<int> word;
        for (Symbol s : word_from_string(word_spec)) word.push_back(static_cast<int>(s));
        const auto seq = block_decompose(word, gens);
        nlohmann::json j = nlohmann::json::array();
        for (const auto& b : seq.blocks)
          j.push_back({{"generator", b.generator},
                       {"run", b.run},
                       {"cusp", b.cusp},
                       {"winding", b.winding}});
        std::cout << j.dump(2) << "\n";
      } else if (fx_spec->parsed()) {
        const auto r = cusp_winding_spectrum(bs, parse_doubles(alpha_spec),
                                             load_schedule(schedule_path), cutoff, seed);
        const std::string wid = sink.stash_witness(r.best_witness);
        sink.emit_rows(spectrum_header(parse_doubles(alpha_spec).size()),
                       {spectrum_row(parse_doubles(alpha_spec), r, wid)},
                       spectrum_json(r, wid), {}, "cusp_spectrum");
        if (!r.converged) rc = 4;
      } else if (fx_freq->parsed()) {
        CuspFrequency freq;
        freq.tail = tail_mass;
        std::stringstream ss(entries_spec);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          if (tok.empty()) continue;
          CuspFrequency::Entry e;
          if (sscanf(tok.c_str(), "%d:%d:%lf", &e.winding, &e.cusp, &e.freq) != 3)
            throw InputError("frequency entries must be winding:cusp:freq");
          freq.entries.push_back(e);
        }
        const auto r = cusp_frequency_spectrum(bs, freq, load_schedule(schedule_path), cutoff,
                                               seed);
        const std::string wid = sink.stash_witness(r.best_witness);
        std::vector<double> alphas;
        for (const auto& e : freq.entries) alphas.push_back(e.freq);
        sink.emit_rows(spectrum_header(alphas.size()), {spectrum_row(alphas, r, wid)},
                       spectrum_json(r, wid), {}, "cusp_frequency");
        if (!r.converged) rc = 4;
      }
    } else if (cmd_verify->parsed()) {
      ResultStore store(store_dir);
      const auto problems = store.verify();
      if (problems.empty()) {
        std::cout << "store ok\n";
        return 0;
      }
      for (const auto& p : problems) std::cerr << "verify: " << p << "\n";
      return 3;
    }
    sink.finalize();
  } catch (const SchemeValidationError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return 3;
  } catch (const GeometryValidationError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return 3;
  } catch (const ParabolicSubsystemError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}

}  // namespace thermospec

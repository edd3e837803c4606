// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure.  Every tolerance is pinned here, in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "thermospec/cli.hpp"
#include "thermospec/fuchsian.hpp"
#include "thermospec/spectra.hpp"
#include "thermospec/store.hpp"

using namespace thermospec;
namespace fs = std::filesystem;

namespace {

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void report(int idx, bool ok, const std::string& name, const std::string& detail,
            double seconds) {
  std::printf("[%2d] %s %s: %s (%.2fs)\n", idx, ok ? "PASS" : "FAIL", name.c_str(),
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

double integral_est(const Certificate& c, const PotentialSpec& pot) {
  double v = 0.0;
  for (size_t i = 0; i < c.states.size(); ++i) {
    for (const CertEdge& e : c.edges[i]) {
      const double mass = c.stationary[i] * e.prob;
      double phi = pot.shift - pot.beta * e.logfp_est;
      for (const auto& [q, obs] : pot.linear) {
        if (obs.kind == Observable::Kind::kLogDerivative) {
          phi += q * e.logfp_est;
        } else {
          Word w = c.states[i];
          w.push_back(c.states[e.target].back());
          phi += q * obs.value_on(w);
        }
      }
      v += mass * phi;
    }
  }
  return v;
}

double binary_entropy(double a) { return -a * std::log(a) - (1 - a) * std::log(1 - a); }

// criterion 1 -----------------------------------------------------------------
void criterion_cantor() {
  Timer t;
  const auto sys = build_subsystem(builtin_linear(3), {0, 2}, 1);
  const auto root = bowen_root(sys);
  const double expect = std::log(2.0) / std::log(3.0);
  const double err = std::abs(root.est - expect);
  const bool ok = err <= 1e-10 && t.seconds() < 1.0;
  std::ostringstream os;
  os << "bowen_root(linear:3 | {0,2}) = " << root.est << ", |err| = " << err;
  report(1, ok, "cantor oracle", os.str(), t.seconds());
}

// criterion 2 -----------------------------------------------------------------
void criterion_variational_identity() {
  Timer t;
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double worst = 0.0;
  int count = 0;
  while (count < 100) {
    MarkovMapPtr map;
    std::vector<Symbol> sub;
    const int kind = rng() % 2;
    int depth;
    if (kind == 0) {
      const int m = 2 + static_cast<int>(rng() % 5);
      for (Symbol s = 1; s <= m; ++s) sub.push_back(s);
      map = builtin_gauss();
      depth = 1 + static_cast<int>(rng() % 3);
    } else {
      const int b = 2 + static_cast<int>(rng() % 4);
      map = builtin_linear(b);
      for (Symbol s = 0; s < b; ++s) sub.push_back(s);
      depth = 1 + static_cast<int>(rng() % 3);
    }
    double states = 1;
    for (int d = 0; d < depth; ++d) states *= static_cast<double>(sub.size());
    if (states > 200) continue;
    const auto sys = build_subsystem(map, sub, depth);

    PotentialSpec pot;
    std::map<Word, double> table;
    for (Symbol s : sub) table[{s}] = unif(rng);
    pot.linear = {{1.0, Observable::locally_constant(1, table, 0.0, "rnd")}};
    pot.beta = 0.75 + 0.75 * unif(rng);
    pot.shift = 0.25 * unif(rng);

    const auto pv = pressure(sys, pot);
    const auto eq = equilibrium(sys, pot);
    const double identity = entropy(*eq) + integral_est(*eq, pot) - pv.P_est;
    worst = std::max(worst, std::abs(identity));
    ++count;
  }
  const bool ok = worst <= 1e-9;
  std::ostringstream os;
  os << "100 random equilibria, max |h + int(Phi) - P| = " << worst;
  report(2, ok, "variational-principle identity", os.str(), t.seconds());
}

// criterion 3 -----------------------------------------------------------------
void criterion_be_closed_form() {
  Timer t;
  Schedule sched;
  sched.eps = {1e-1, 1e-2, 1e-3};
  sched.alphabets = {{0, 1}, {0, 1}, {0, 1}};
  sched.depths = {1, 1, 1};
  double worst_closed = 0.0, worst_agree = 0.0, worst_brute = 0.0;
  for (int i = 1; i <= 9; ++i) {
    const double a = 0.1 * i;
    FrequencyVector freq;
    freq.head = {a, 1.0 - a};
    const auto r = besicovitch_eggleston(builtin_linear(2), freq, sched, Backend::kBoth, 3);
    const double closed = binary_entropy(a) / std::log(2.0);
    // Independent oracle: brute force over the Bernoulli family.
    double brute = 0.0;
    for (int g = 1; g < 4096; ++g) {
      const double p = g / 4096.0;
      if (std::abs(p - a) <= 2e-4) brute = std::max(brute, binary_entropy(p) / std::log(2.0));
    }
    double leg = 0.0, dir = 0.0;
    for (const auto& w : r.witnesses) {
      if (w.backend == "legendre") leg = std::max(leg, w.dim_est);
      if (w.backend == "direct") dir = std::max(dir, w.dim_est);
    }
    worst_closed = std::max({worst_closed, std::abs(leg - closed), std::abs(dir - closed)});
    worst_agree = std::max(worst_agree, std::abs(leg - dir));
    worst_brute = std::max(worst_brute, std::abs(r.lower_bound_est - brute));
  }
  const bool ok = worst_closed <= 1e-4 && worst_agree <= 1e-4 && worst_brute <= 5e-4;
  std::ostringstream os;
  os << "max |backend - H(a)/log2| = " << worst_closed << ", backend gap = " << worst_agree
     << ", vs brute-force Bernoulli scan = " << worst_brute;
  report(3, ok, "besicovitch-eggleston closed form", os.str(), t.seconds());
}

// criterion 4 -----------------------------------------------------------------
void criterion_renyi_tail_and_beta() {
  Timer t;
  Schedule sched;
  bool ok = true;
  std::ostringstream os;
  for (const auto& head : std::vector<std::vector<double>>{{0.1, 0.2}, {0.5}, {0.0, 0.0, 0.3}}) {
    FrequencyVector freq;
    freq.head = head;
    freq.tail = 0.3;
    const auto r = besicovitch_eggleston(builtin_renyi(), freq, sched);
    if (!(r.exact && r.value == 0.5)) ok = false;
  }
  const auto bi = beta_infinity(*builtin_renyi());
  ok = ok && std::abs(bi.value - 0.5) <= 1e-6 && bi.exact;
  os << "three tail-case queries returned exactly 0.5; beta_infinity(renyi) = " << bi.value;
  report(4, ok, "renyi BE tail case + beta_infinity", os.str(), t.seconds());
}

// criterion 5 -----------------------------------------------------------------
void criterion_bounded_digits() {
  Timer t;
  bool ok = true;
  std::ostringstream os;
  const auto t2 = bounded_digit_dimension(2);
  ok = ok && t2.exact_zero && t2.est == 0.0;

  double prev = 0.0, worst_cauchy = 0.0;
  double t3 = 0.0, t15 = 0.0;
  for (int n = 3; n <= 15; ++n) {
    const auto r = bounded_digit_dimension(n);
    if (r.levels.size() < 2) {
      ok = false;
      break;
    }
    const auto& a = r.levels[r.levels.size() - 2];
    const auto& b = r.levels.back();
    const double hausdorff =
        std::max(std::abs(a.t.lo - b.t.lo), std::abs(a.t.hi - b.t.hi));
    worst_cauchy = std::max(worst_cauchy, hausdorff);
    if (hausdorff > 1e-3) ok = false;
    if (!(r.est > prev)) ok = false;  // strict increase in n
    prev = r.est;
    if (n == 3) t3 = r.est;
    if (n == 15) t15 = r.est;
  }
  ok = ok && t15 > t3;
  os << "t_2 = 0, t_n strictly increasing (t_3 = " << t3 << " ... t_15 = " << t15
     << "), max bracket Cauchy gap = " << worst_cauchy;
  report(5, ok, "bounded-digit dimensions", os.str(), t.seconds());
}

// criterion 6 -----------------------------------------------------------------
void criterion_gauss_cross_check() {
  Timer t;
  const auto sys10 = build_subsystem(builtin_gauss(), {1, 2}, 10);
  const auto root10 = bowen_root(sys10);
  const auto sys14 = build_subsystem(builtin_gauss(), {1, 2}, 14);
  const auto root14 = bowen_root(sys14);
  const double self_gap = std::abs(root10.est - root14.est);
  const double lit_gap = std::abs(root10.est - 0.5313);
  const bool ok = self_gap <= 5e-4 && lit_gap <= 1e-3 && t.seconds() < 30.0;
  std::ostringstream os;
  os << "depth-10 root = " << root10.est << ", |depth10 - depth14| = " << self_gap
     << ", |depth10 - 0.5313| = " << lit_gap;
  report(6, ok, "gauss {1,2} bounded-type constant", os.str(), t.seconds());
}

// criterion 7 -----------------------------------------------------------------
void criterion_flat_witnesses() {
  Timer t;
  bool ok = true;
  double worst_residual = 0.0, worst_dim_gap = 0.0;
  for (const double alpha : {2.5, 5.0, 10.0}) {
    const auto r = flat_spectrum_witnesses(alpha, 4, 0);
    double prev_mu_dim = 0.0;
    for (const auto& w : r.witnesses) {
      worst_residual = std::max(worst_residual, std::abs(w.b1_integral - w.b1_target));
      worst_dim_gap = std::max(worst_dim_gap, std::abs(w.dim_nu - w.dim_mu));
      if (w.dim_mu + 1e-12 < prev_mu_dim) ok = false;  // nondecreasing along schedule
      prev_mu_dim = w.dim_mu;
    }
  }
  ok = ok && worst_residual <= 1e-8 && worst_dim_gap <= 1e-9;
  std::ostringstream os;
  os << "max |int b1 d nu_j - (alpha + 1/j)| = " << worst_residual
     << ", max |dim nu_j - dim mu_p| = " << worst_dim_gap << ", dim(mu_p) nondecreasing";
  report(7, ok, "flat-spectrum witnesses", os.str(), t.seconds());
}

// criterion 8 -----------------------------------------------------------------
void criterion_lyapunov_zero() {
  Timer t;
  Schedule sched;
  sched.alphabets = {{1, 6}, {1, 12}};
  sched.induced_k_cap = 24;
  const auto r = lyapunov_spectrum(builtin_renyi(), 0.0, sched);
  bool ok = r.feasible && !r.witnesses.empty();
  double worst_chi = 0.0, worst_gap = 0.0;
  // The mixture witness dimension must equal the Bowen root of its own
  // subsystem; recompute the roots independently.
  for (size_t st = 0; st < sched.alphabets.size() && ok; ++st) {
    const auto scheme = renyi_jump_scheme(sched.induced_k_cap, sched.alphabets[st].second);
    std::vector<Symbol> ids(scheme.patterns.size());
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<Symbol>(i);
    const auto root = bowen_root(build_subsystem(scheme.induced, ids, 1));
    const auto& w = r.witnesses[st];
    worst_chi = std::max(worst_chi, w.residual);
    worst_gap = std::max(worst_gap, std::abs(w.dim_est - root.est));
  }
  ok = ok && worst_chi <= 1e-3 && worst_gap <= 1e-8;
  std::ostringstream os;
  os << "mixture witnesses: max chi = " << worst_chi
     << ", max |dim - subsystem bowen root| = " << worst_gap
     << ", best dim = " << r.lower_bound_est;
  report(8, ok, "lyapunov alpha->0 path", os.str(), t.seconds());
}

// criterion 9 -----------------------------------------------------------------
void criterion_cylinder_coding() {
  Timer t;
  std::mt19937_64 rng(271828);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int failures_here = 0;
  const auto renyi = builtin_renyi();
  const auto gauss = builtin_gauss();
  const auto lin3 = builtin_linear(3);
  for (int trial = 0; trial < 10000; ++trial) {
    const double x = unif(rng);
    const int n = 1 + static_cast<int>(rng() % 40);
    const MarkovMapPtr& map = (trial % 3 == 0) ? renyi : (trial % 3 == 1 ? gauss : lin3);
    try {
      const auto c = code(*map, x, n);
      const auto cyl = cylinder(*map, c.word);
      if (!(cyl.box.lo <= x && x <= cyl.box.hi)) ++failures_here;
    } catch (const EscapeError&) {
      // Gauss orbits of rationals can exit the partition; not a containment
      // failure.
    }
  }
  std::vector<Symbol> sub;
  for (Symbol s = 1; s <= 6; ++s) sub.push_back(s);
  const auto prof = decay_profile(*renyi, sub, 12);
  bool decay_ok = prof.complete && prof.all_exact;
  for (int n = 1; n <= 12 && decay_ok; ++n)
    decay_ok = prof.exact[n - 1] == Rat{1, n + 1};
  const bool ok = failures_here == 0 && decay_ok;
  std::ostringstream os;
  os << "containment failures = " << failures_here
     << "/10000 (n <= 40), renyi g(n) = 1/(n+1) exactly for n <= 12: "
     << (decay_ok ? "yes" : "no");
  report(9, ok, "cylinder/coding properties", os.str(), t.seconds());
}

// criterion 10 ----------------------------------------------------------------
void criterion_fuchsian() {
  Timer t;
  bool ok = true;
  std::ostringstream os;

  const auto gens = GeneratorSet::default_example();
  double worst_iso = 0.0;
  for (const auto& g : gens.gens) {
    const auto ic = isometric_circle(g);
    for (int s = 0; s < 32; ++s) {
      const Cplx z = ic.center + std::polar(ic.radius, 2.0 * M_PI * s / 32.0);
      worst_iso = std::max(worst_iso, std::abs(std::abs(g.derivative(z)) - 1.0));
    }
  }
  ok = ok && worst_iso <= 1e-10;

  std::mt19937 rng(99);
  int roundtrip_fail = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<int> word;
    int prev = -1;
    const int len = 1 + static_cast<int>(rng() % 14);
    while (static_cast<int>(word.size()) < len) {
      const int g = static_cast<int>(rng() % 4);
      if (prev >= 0 && gens.inverse_of[static_cast<size_t>(prev)] == g) continue;
      word.push_back(g);
      prev = g;
    }
    if (block_decompose(word, gens).concatenate() != word) ++roundtrip_fail;
  }
  ok = ok && roundtrip_fail == 0;

  const auto bs = build_bowen_series(gens);
  const auto fit = cusp_arc_decay(bs, 0, 2, 200);
  ok = ok && std::abs(fit.slope + 2.0) <= 0.1;

  Schedule sched;
  sched.eps = {1e-1, 1e-2};
  sched.alphabets = {{0, 3}, {0, 3}};
  sched.depths = {1, 1};
  CuspFrequency esc;
  esc.entries = {{0, 1, 0.3}, {1, 2, 0.2}};
  const auto r = cusp_frequency_spectrum(bs, esc, sched, 16);
  ok = ok && r.exact && r.value == 0.5;

  os << "isometric-circle deviation = " << worst_iso << ", block round-trip failures = "
     << roundtrip_fail << "/10000, arc-decay slope = " << fit.slope
     << ", escaping-frequency value = " << r.value;
  report(10, ok, "fuchsian suite", os.str(), t.seconds());
}

// criterion 11 ----------------------------------------------------------------
void criterion_bcf_statistics() {
  Timer t;
  const auto s =
      sample_birkhoff(builtin_renyi(), {Observable::digit_value()}, 1000000, 400, 2024);
  const double median = s.median_final[0];
  bool mins_ok = true;
  double worst_min = 0.0;
  for (const auto& series : s.series[0]) {
    // The running minimum is nonincreasing by construction; it must have
    // dipped to 2.7 by n = 10^6.
    if (series.running_min_mean > 2.7) mins_ok = false;
    worst_min = std::max(worst_min, series.running_min_mean);
    if (series.running_min_mean > series.final_mean + 1e-12) mins_ok = false;
  }
  const bool ok = median >= 2.5 && median <= 3.6 && mins_ok && t.seconds() < 120.0;
  std::ostringstream os;
  os << "median digit mean = " << median << ", max per-seed running-min = " << worst_min
     << " (<= 2.7 required)";
  report(11, ok, "BCF digit statistics (smoke)", os.str(), t.seconds());
}

// criterion 12 ----------------------------------------------------------------
void criterion_reproducibility() {
  Timer t;
  bool ok = true;
  std::ostringstream os;
  const fs::path base = fs::temp_directory_path() / "thermospec_acceptance";
  fs::remove_all(base);

  auto slurp_dir = [](const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (!e.is_regular_file()) continue;
      std::ifstream in(e.path(), std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      out[fs::relative(e.path(), root).string()] = ss.str();
    }
    return out;
  };

  const std::vector<std::vector<std::string>> jobs = {
      {"spectrum", "be", "--map", "linear:2", "--freq", "0.25,0.75", "--backend", "both",
       "--seed", "7", "--out", "csv"},
      {"spectrum", "flat", "--alpha", "3", "--jmax", "2", "--seed", "7"},
      {"spectrum", "be", "--map", "renyi", "--freq-head", "0.1,0.2", "--tail", "0.3"},
  };
  int job_idx = 0;
  for (const auto& job : jobs) {
    const fs::path d1 = base / ("s" + std::to_string(job_idx) + "a");
    const fs::path d2 = base / ("s" + std::to_string(job_idx) + "b");
    for (const auto& d : {d1, d2}) {
      auto args = job;
      args.push_back("--store");
      args.push_back(d.string());
      if (run_cli(args) != 0) ok = false;
    }
    if (slurp_dir(d1) != slurp_dir(d2)) {
      ok = false;
      os << "store mismatch for job " << job_idx << "; ";
    }
    if (run_cli({"verify", "--store", d1.string()}) != 0) {
      ok = false;
      os << "verify failed for job " << job_idx << "; ";
    }
    ++job_idx;
  }
  fs::remove_all(base);
  os << "3 configs, byte-identical reruns, verify exit 0";
  report(12, ok, "reproducibility + verify", os.str(), t.seconds());
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_cantor();
  criterion_variational_identity();
  criterion_be_closed_form();
  criterion_renyi_tail_and_beta();
  criterion_bounded_digits();
  criterion_gauss_cross_check();
  criterion_flat_witnesses();
  criterion_lyapunov_zero();
  criterion_cylinder_coding();
  criterion_fuchsian();
  criterion_bcf_statistics();
  criterion_reproducibility();
  std::printf("%s (%d failure%s)\n", failures == 0 ? "ALL CRITERIA PASS" : "FAILURES",
              failures, failures == 1 ? "" : "s");
  return failures == 0 ? 0 : 1;
}

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "thermospec/inducing.hpp"
#include "thermospec/maps.hpp"
#include "thermospec/measures.hpp"
#include "thermospec/thermo.hpp"

namespace thermospec {

// Tolerance / subsystem schedule realizing the double limit (k -> infinity,
// eps -> 0) as explicit finite stages.
struct Schedule {
  std::vector<double> eps = {1e-1, 1e-2, 1e-3};
  std::vector<std::pair<Symbol, Symbol>> alphabets = {{1, 5}, {1, 10}, {1, 20}};
  std::vector<int> depths = {2, 4, 6};
  bool inducing = true;  // route parabolic maps through the jump transform
  int induced_k_cap = 40;

  std::string to_json() const;
  static Schedule from_json(const std::string& text);
};

enum class Backend { kLegendre, kDirect, kBoth };

struct SpectrumQuery {
  MarkovMapPtr map;
  std::vector<Observable> observables;
  std::vector<double> targets;
  Schedule schedule;
  Backend backend = Backend::kLegendre;
  unsigned seed = 0;
};

struct WitnessRecord {
  CertPtr cert;
  double eps = 0.0;        // tolerance stage the witness was found at
  double dim_lo = 0.0;     // certified bracket low end
  double dim_est = 0.0;
  double residual = 0.0;   // max_i |int phi_i d mu - alpha_i|
  std::string backend;
  std::string subsystem;   // human-readable subsystem id
};

struct SpectrumResult {
  bool feasible = true;
  bool exact = false;            // closed-form special value (no solver run)
  double value = 0.0;            // exact value, or the aggregated lower bound
  double lower_bound = 0.0;      // max(best witness dim_lo, beta floor)
  double lower_bound_est = 0.0;  // same with point estimates
  bool beta_floor_applied = false;
  double beta_floor = 0.0;
  double bracket_width = 0.0;    // of the best witness dimension
  bool converged = true;
  std::string provenance;
  std::vector<WitnessRecord> witnesses;
  CertPtr best_witness;
};

struct FrequencyVector {
  std::vector<double> head;  // frequencies of the first partition elements
  double tail = 0.0;         // declared mass beyond the head

  double total() const {
    double s = tail;
    for (double v : head) s += v;
    return s;
  }
  void validate() const;
};

struct FeasibilityResult {
  bool witness_found = false;
  double eps = 0.0;  // stage at which the witness was found
  CertPtr witness;
  double residual = 0.0;
  std::string how;  // periodic | mixture | equilibrium | direct
  bool provably_infeasible = false;  // value range excludes the target
  std::string note;
};

// Main Theorem (a) as a semi-decision: periodic-orbit enumeration, two-point
// mixtures, then equilibrium sweeps; exhaustion is a report, never a proof of
// emptiness (unless the targets fall outside the observable value range).
FeasibilityResult check_feasibility(const SpectrumQuery& query);

// Main Theorem (b): conditional variational lower bounds with witness
// certificates, with the beta_infinity floor applied when every observable is
// bounded and the level set is nonempty.
SpectrumResult birkhoff_spectrum(const SpectrumQuery& query);

// Lyapunov spectrum L(alpha); alpha = 0 on maps with a neutral periodic point
// follows the mixture path (near-zero Lyapunov exponent, dimension of the
// best subsystem equilibrium).  Pass alpha = infinity for the unbounded end.
SpectrumResult lyapunov_spectrum(MarkovMapPtr map, double alpha, const Schedule& schedule,
                                 Backend backend = Backend::kLegendre, unsigned seed = 0);

// Besicovitch-Eggleston spectrum for a frequency vector over the Markov
// partition; the Renyi map with declared total frequency < 1 short-circuits
// to the exact value 1/2.
SpectrumResult besicovitch_eggleston(MarkovMapPtr map, const FrequencyVector& freq,
                                     const Schedule& schedule,
                                     Backend backend = Backend::kLegendre, unsigned seed = 0);

// dim_H E(n) for the Renyi map (BCF digits bounded by n): t_2 = 0 exactly,
// otherwise the parabolic Bowen root on the subalphabet {1..n-1}.
ParabolicRootResult bounded_digit_dimension(int n, ParabolicRootOptions opts = {});

struct FlatWitness {
  int j = 0;
  Symbol p = 0;          // fixed-point branch used by delta_p
  double t = 0.0;        // mixing weight t_j
  CertPtr nu;            // nu_j = t_j mu_{p(j)} + (1 - t_j) delta_1
  CertPtr mu;            // mu_p = (1 - p^{-1/2}) xi_p + p^{-1/2} delta_p
  double b1_integral = 0.0;
  double b1_target = 0.0;   // alpha + 1/j
  double dim_nu = 0.0;
  double dim_mu = 0.0;
};

struct FlatSpectrumResult {
  double alpha = 0.0;  // infinity encoded as +inf
  std::vector<FlatWitness> witnesses;
};

// Witness sequence for the completely flat mixed Birkhoff spectrum of the
// BCF digit mean: nu_j has integral exactly alpha + 1/j, dimension equal to
// dim(mu_{p(j)}), and the mu_p dimensions grow along the subsystem schedule.
FlatSpectrumResult flat_spectrum_witnesses(double alpha, int j_max, unsigned seed = 0);

struct SampleSeries {
  double final_mean = 0.0;
  double running_min_mean = 0.0;
  double running_max_mean = 0.0;
};

struct SampleStats {
  // indexed [observable][seed]
  std::vector<std::vector<SampleSeries>> series;
  std::vector<double> median_final, q1_final, q3_final;
};

// Empirical Birkhoff means along random orbits (double-precision dynamics,
// compensated running sums); deterministic per (seed, worker-independent).
SampleStats sample_birkhoff(MarkovMapPtr map, const std::vector<Observable>& observables,
                            std::int64_t n, int seeds, unsigned rng_seed = 0);

}  // namespace thermospec

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "thermospec/maps.hpp"
#include "thermospec/measures.hpp"

namespace thermospec {

// One transition of a finite subsystem: the (depth+1)-cylinder it lives on,
// with the log|f'| bracket of the leading branch over that cylinder and the
// mean-value point estimate log(diam(shifted)/diam(word)).
struct SubsystemEdge {
  int target = -1;
  Word word;  // depth+1 symbols
  Interval logfp;
  double logfp_est = 0.0;
  double diam = 0.0;
};

// Finite subsystem of a Markov map: admissible depth-d words over a finite
// subalphabet, pruned to the maximal subgraph with out-degree >= 1.
struct FiniteSubsystem {
  MarkovMapPtr map;
  std::vector<Symbol> subalphabet;
  int depth = 1;
  std::vector<Word> states;
  std::vector<std::vector<SubsystemEdge>> edges;
  bool pruned_any = false;
  std::optional<IrreducibilityCertificate> irreducibility;

  size_t state_count() const { return states.size(); }
  size_t edge_count() const;
};

FiniteSubsystem build_subsystem(MarkovMapPtr map, const std::vector<Symbol>& subalphabet,
                                int depth, bool check_irreducibility = false);

// Linear-combination potential: sum_i q_i * phi_i - beta * log|f'| + shift.
struct PotentialSpec {
  std::vector<std::pair<double, Observable>> linear;
  double beta = 0.0;
  double shift = 0.0;

  static PotentialSpec geometric(double beta) {
    PotentialSpec p;
    p.beta = beta;
    return p;
  }

  Interval edge_bracket(const SubsystemEdge& e) const;
  double edge_est(const SubsystemEdge& e) const;
};

struct PressureValue {
  Interval P;          // [P of inf-weights, P of sup-weights]
  double P_est = 0.0;  // from the mean-value point weights
  double lambda = 0.0; // spectral radius at the point weights
  int iterations = 0;
  double residual = 0.0;
  bool restricted_to_dominant_scc = false;
};

// Topological pressure on the subsystem: log spectral radius of the transfer
// matrix M_{w->h} = exp(potential on the transition cylinder), computed for
// the inf, sup and point weights.  Reducible graphs are handled per strongly
// connected component and flagged.
PressureValue pressure(const FiniteSubsystem& sys, const PotentialSpec& pot);

// Point-weight pressure only (solver inner loops).
double pressure_est(const FiniteSubsystem& sys, const PotentialSpec& pot);

// Equilibrium Markov measure from the Perron eigendata at the point weights:
// Q_{wh} = M_{wh} v_h / (lambda v_w), stationary p from left (x) right
// eigenvectors.  Satisfies h + int(Phi) = log lambda exactly.
CertPtr equilibrium(const FiniteSubsystem& sys, const PotentialSpec& pot,
                    const std::vector<Observable>& observables = {});

struct BowenRoot {
  Interval t;
  double est = 0.0;
  int pressure_evals = 0;
};

struct ParabolicSubsystemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Zero of beta -> P(-beta log|f'|).  Requires a uniformly expanding
// subsystem (inf log|f'| > 0 on every transition cylinder); parabolic
// subsystems are refused and must be routed through the inducing module.
BowenRoot bowen_root(const FiniteSubsystem& sys, double tol = 1e-12);

struct BetaInfinityResult {
  double value = 0.0;
  bool exact = false;
  bool finite_alphabet = false;  // -infinity sentinel: no constraint
  double fit_residual = 0.0;
  std::string mode;
};

enum class BetaInfinityMode { kClosedForm, kFit };

// beta_infinity = convergence exponent of sum_a (inf_{Delta_a}|f'|)^{-beta};
// exact for built-ins with closed-form diameters, heuristic log-log fit
// otherwise.  Finite alphabets return the -infinity sentinel.
BetaInfinityResult beta_infinity(const MarkovMap& map, Symbol probe_lo = 8,
                                 Symbol probe_hi = 512,
                                 BetaInfinityMode mode = BetaInfinityMode::kClosedForm);

// Power-iteration Perron data for a sparse nonnegative matrix given by rows
// of (target, weight); includes Collatz-Wielandt bounds on the spectral
// radius.  Deterministic all-ones start.
struct PerronData {
  double lambda = 0.0;
  double lambda_lo = 0.0, lambda_hi = 0.0;
  std::vector<double> right, left;
  int iterations = 0;
  double residual = 0.0;
};

PerronData perron(const std::vector<std::vector<std::pair<int, double>>>& rows,
                  double tol = 1e-13, int max_iters = 100000);

}  // namespace thermospec

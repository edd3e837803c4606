#pragma once

#include <optional>
#include <string>
#include <vector>

#include "thermospec/maps.hpp"
#include "thermospec/measures.hpp"
#include "thermospec/thermo.hpp"

namespace thermospec {

// Finite description of a family of inducing words: prefix^k . suffix for k
// in a range, e.g. {1^k a : k >= 0, a >= 2} for the Renyi jump transform, or
// {gamma^n g} for Bowen-Series block coding.  tau is the word length minus
// the suffix length plus `tau_offset` (jump transforms return after the
// whole word, block schemes keep a one-symbol lookahead).
struct PatternGenerator {
  Symbol prefix_symbol = 0;
  int repeat_lo = 0;
  int repeat_hi = 0;  // inclusive truncation of the repeat count
  std::vector<Symbol> suffix_set;
  int tau_from_end = 0;  // tau = |word| - tau_from_end

  std::string to_json() const;
};

struct InducedPattern {
  Word word;
  int tau = 0;
};

// A validated jump/first-return transform: the pattern inventory, the induced
// Markov map assembled from composed base branches, and the transcript of the
// structural checks that were run.
struct InducingScheme {
  MarkovMapPtr base;
  std::vector<PatternGenerator> generators;
  std::vector<InducedPattern> patterns;  // induced symbol i <-> patterns[i]
  MarkovMapPtr induced;
  std::vector<std::string> transcript;  // validation record, re-runnable
  bool fully_branched = false;

  double tau_of(Symbol induced_symbol) const {
    return static_cast<double>(patterns[induced_symbol].tau);
  }

  // Return time as a depth-1 observable on the induced alphabet.
  Observable tau_observable() const;
  // S_tau(phi) as a depth-1 observable on the induced alphabet; throws if the
  // pattern words do not resolve phi along the return orbit.
  Observable lift_observable(const Observable& phi) const;

  std::string to_json() const;
};

struct SchemeValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Assemble and validate a jump transform: pattern domains must have disjoint
// interiors, return orbits must avoid neutral fixed points, the induced map
// must be finitely irreducible on its truncation, and the induced second
// iterate must be uniformly expanding.
InducingScheme build_jump_transform(MarkovMapPtr base,
                                    std::vector<PatternGenerator> generators);

// The Renyi jump scheme {1^k a : 0 <= k <= k_max, 2 <= a <= a_max}.
InducingScheme renyi_jump_scheme(int k_max, Symbol a_max);

// Scheme from / to the JSON description {base, patterns:[...], truncation}.
InducingScheme scheme_from_json(const std::string& text);

struct DistortionEstimate {
  double sampled = 0.0;        // max log-ratio / |f~x - f~y| over sampled pairs
  std::optional<double> closed_form;  // parabolic-block recipe when available
  double c0 = 0.0;             // sup |f''| over the parabolic block, when used
  int truncation = 0;
};

// Distortion constant C with log((f~)'x / (f~)'y) <= C |f~x - f~y| on each
// induced branch; numeric sampling plus the closed-form parabolic-block
// override for the Renyi map.
DistortionEstimate estimate_distortion_constant(const InducingScheme& scheme,
                                                int truncation = 64, int pairs = 10000);

// Abramov-Kac projection of an induced-side certificate to the base system:
// h, chi and all integrals rescale by the reciprocal mean return time.
// Integrals named in `base_observables` are computed from their S_tau lifts.
CertPtr project_measure(const InducingScheme& scheme, const CertPtr& induced_cert,
                        const std::vector<Observable>& base_observables = {});

// Parabolic Bowen root -------------------------------------------------------

struct ParabolicRootLevel {
  double cell_size = 0.0;
  Interval t;
  double est = 0.0;
  int cells = 0;
  int pressure_evals = 0;
};

struct ParabolicRootResult {
  Interval t;
  double est = 0.0;
  std::vector<ParabolicRootLevel> levels;
  bool exact_zero = false;  // degenerate subsystem (single neutral branch)
};

struct ParabolicRootOptions {
  std::vector<double> cell_sizes = {1e-2, 3e-3};  // refinement schedule
  int max_cells = 3500;
  double root_tol = 1e-10;
};

// Bowen root of the jump-transformed system on a subalphabet containing the
// neutral index, via adaptive prefix-code cells over the induced full shift.
// The countable pattern tail (unbounded parabolic block length) is folded
// into lump cells whose transfer weights are bracketed by monotone integral
// bounds, so no truncation deficit is left outside the reported bracket.
ParabolicRootResult parabolic_bowen_root(MarkovMapPtr base,
                                         const std::vector<Symbol>& subalphabet,
                                         ParabolicRootOptions opts = {});

}  // namespace thermospec

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "thermospec/interval.hpp"
#include "thermospec/mobius.hpp"
#include "thermospec/symbolic.hpp"

namespace thermospec {

enum class Ambient { kInterval, kCircle };

// One branch f_a of a Markov map: a monotone C^1 diffeomorphism from its
// domain onto its image, described through evaluators.  Built-in branches
// additionally carry the exact integer Mobius matrix of the inverse, which
// the cylinder machinery uses for endpoint-exact enclosures.
struct Branch {
  Symbol symbol = 0;
  Interval domain;                 // ambient coordinates (angle for circle maps)
  bool closed_left = true;
  bool closed_right = false;
  std::function<double(double)> forward;
  std::function<double(double)> dforward;          // f'
  std::function<double(double)> d2forward;         // f'' (optional)
  bool has_d2 = false;
  std::function<Interval(const Interval&)> inverse_enclosure;  // monotone hull
  std::function<double(double)> inverse;
  bool increasing = true;
  bool abs_dforward_monotone = true;  // |f'| monotone on the domain
  std::optional<MobiusZ> inverse_mobius;
  std::optional<Rat> domain_lo_rat, domain_hi_rat;
  // Optional exact range override (used where |f'| is unimodal, e.g. arcs).
  std::function<Interval(const Interval&)> abs_derivative_range_fn;

  // [inf, sup] of |f'| over a subinterval of the domain.
  Interval abs_derivative_range(const Interval& sub, int grid = 16) const;
};

struct CylinderEnclosure {
  Word word;
  Interval box;  // outward-rounded enclosure of the cylinder
  std::optional<Rat> lo_rat, hi_rat;  // exact endpoints when available
  double diameter() const { return box.width(); }
  double representative() const { return box.mid(); }
  bool exact() const { return lo_rat && hi_rat; }
};

struct EscapeError : std::runtime_error {
  int escape_time;
  EscapeError(int t, const std::string& msg) : std::runtime_error(msg), escape_time(t) {}
};

// Depth-r locally constant observable, or the distinguished log-derivative.
// Locally constant observables carry a value table over depth-r words of a
// declared subalphabet plus a tail rule for symbols outside the table.
struct Observable {
  enum class Kind { kLocallyConstant, kLogDerivative };
  enum class Tail { kNone, kConstant, kDigitValue };  // digit value: symbol i -> i+1

  Kind kind = Kind::kLocallyConstant;
  int depth = 1;
  std::map<Word, double> table;
  Tail tail = Tail::kNone;
  double tail_constant = 0.0;
  bool bounded = true;
  std::string name;

  static Observable log_derivative();
  static Observable indicator(Symbol a, std::string name = "");
  // BCF digit value on the Renyi coding: symbol i -> digit i+1 (unbounded).
  static Observable digit_value();
  static Observable locally_constant(int depth, std::map<Word, double> table,
                                     double tail_constant, std::string name);

  // Value on the depth-`depth` cylinder starting with the given word
  // (word length must be >= depth for locally constant observables).
  double value_on(const Word& w) const;
};

class MarkovMap;
using MarkovMapPtr = std::shared_ptr<const MarkovMap>;

// Immutable description of a countable-branch Markov interval/circle map.
class MarkovMap {
 public:
  virtual ~MarkovMap() = default;

  const std::string& name() const { return name_; }
  Ambient ambient() const { return ambient_; }
  const Alphabet& alphabet() const { return alphabet_; }
  const TransitionRule& rule() const { return rule_; }
  bool fully_branched() const { return fully_branched_; }
  bool has_closed_form_cylinders() const { return closed_form_cylinders_; }

  // Neutral indices with their neutral points.
  const std::vector<std::pair<Symbol, double>>& neutral() const { return neutral_; }
  bool is_neutral_index(Symbol a) const;

  virtual const Branch& branch(Symbol a) const = 0;
  virtual bool has_branch(Symbol a) const = 0;
  // Symbol of the branch whose domain contains x (built-ins use closed
  // forms); nullopt if x escapes the partition.
  virtual std::optional<Symbol> locate(double x) const = 0;

  // Exact one-step coding for rational points, when the map supports it.
  virtual std::optional<std::pair<Symbol, Rat>> step_exact(const Rat& x) const {
    (void)x;
    return std::nullopt;
  }

  // inf |f'| over the branch domain; closed forms for built-ins.
  double inf_abs_derivative(Symbol a) const;
  double sup_abs_derivative(Symbol a) const;

  // Validation per (M0)/(M1): pairwise disjoint interiors on a finite probe
  // set, bounded derivative warning, neutral data consistency.
  std::vector<std::string> validate(const std::vector<Symbol>& probe) const;

 protected:
  std::string name_;
  Ambient ambient_ = Ambient::kInterval;
  Alphabet alphabet_ = Alphabet::integers(1);
  TransitionRule rule_ = TransitionRule::full_shift();
  bool fully_branched_ = true;
  bool closed_form_cylinders_ = false;
  std::vector<std::pair<Symbol, double>> neutral_;
};

// Built-in maps -------------------------------------------------------------

// Renyi (backward continued fraction) map x -> 1/(1-x) - floor(1/(1-x)) on
// [0,1); branch i >= 1 on [1-1/i, 1-1/(i+1)), neutral fixed point at 0.
MarkovMapPtr builtin_renyi();
// Gauss map x -> 1/x - floor(1/x); branch i >= 1 on (1/(i+1), 1/i].
MarkovMapPtr builtin_gauss();
// Farey map: x/(1-x) on [0,1/2), (1-x)/x on [1/2,1].
MarkovMapPtr builtin_farey();
// Full-branched linear map of slope b >= 2, symbols 0..b-1.
MarkovMapPtr builtin_linear(int b);
// Select by name string: renyi | gauss | farey | linear:b | custom:file.
MarkovMapPtr map_by_name(const std::string& spec);
// Custom map from a JSON description of inverse branches (Mobius matrices or
// polynomial coefficients).
MarkovMapPtr custom_map_from_json(const std::string& json_text);

// Finite-branch map assembled from explicit branches (used by inducing and
// the Bowen-Series facade).
MarkovMapPtr make_finite_map(std::string name, Ambient ambient, std::vector<Branch> branches,
                             TransitionRule rule, bool fully_branched,
                             std::vector<std::pair<Symbol, double>> neutral = {});

// Operations ----------------------------------------------------------------

// Interval enclosure of the cylinder Delta_omega, by composing inverse
// branches right-to-left; exact integer Mobius products where available.
CylinderEnclosure cylinder(const MarkovMap& map, const Word& w);

struct CodeResult {
  Word word;
  std::vector<double> trail;  // iterates x, f x, ..., f^{n-1} x
};

// First n symbols of the coding of x, with the iterate trail.  Built-ins use
// exact rational iteration; throws EscapeError if the orbit leaves the
// partition.
CodeResult code(const MarkovMap& map, double x, int n);

// BCF digits b_j(x) = floor(1/(1 - f^{j-1}x)) + 1 >= 2.
std::vector<std::int64_t> bcf_digits(double x, int n);
// Enclosure of every x whose first n BCF digits match; digits must be >= 2.
CylinderEnclosure bcf_eval(const std::vector<std::int64_t>& digits);

// Renyi condition constant K = max_a sup |f''| / |f'|^2, closed forms for
// built-ins, grid + refinement otherwise; nullopt if second derivatives are
// unavailable.
std::optional<double> check_renyi_condition(const MarkovMap& map,
                                            const std::vector<Symbol>& subalphabet);

struct M3Result {
  bool ok = false;
  double s = 0.0;                    // the (M3) constant when ok
  std::pair<Symbol, Symbol> pair{};  // minimizing / violating pair
};

// (M3) check over a finite subalphabet via the product bound
// inf_{D_{a1}}|f'| * inf_{D_{a2}}|f'| over qualifying pairs (a2 expanding or
// a1 != a2).  A caller-supplied tail assertion extends the result to the full
// alphabet for built-ins.
M3Result check_m3(const MarkovMap& map, const std::vector<Symbol>& subalphabet,
                  bool monotone_tail_assertion = false);

struct DecayProfile {
  std::vector<double> g;       // g[n-1] = max diameter over length-n words
  std::vector<Word> argmax;    // witness word per length
  std::vector<Rat> exact;      // exact diameters when every enclosure is exact
  bool all_exact = false;
  bool complete = true;        // false if the combinatorial budget was hit
};

DecayProfile decay_profile(const MarkovMap& map, const std::vector<Symbol>& subalphabet,
                           int n_max, std::int64_t budget = 2'000'000);

struct DistortionBound {
  Interval dn;     // bracket on D_n(phi)
  bool exact = false;
  bool complete = true;
};

// D_n(phi) bracket: exact combinatorics for locally constant phi, the
// Renyi-condition bound K*(sum of decay profile + 1) for the log-derivative.
DistortionBound distortion_dn(const MarkovMap& map, const Observable& phi,
                              const std::vector<Symbol>& subalphabet, int n);

}  // namespace thermospec

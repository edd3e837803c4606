#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "thermospec/maps.hpp"

namespace thermospec {

// A numeric value with a validity bracket; `est` is a point estimate inside
// [lo, hi] (for equilibrium certificates it is the value consistent with the
// transfer-matrix weights, so finite-state identities hold exactly on `est`).
struct ValueBracket {
  double lo = 0.0;
  double hi = 0.0;
  double est = 0.0;
  double width() const { return hi - lo; }
};

// Per-transition data of a finite-state certificate: target state, kernel
// probability, log|f'| bracket over the (depth+1)-cylinder.
struct CertEdge {
  int target = -1;
  double prob = 0.0;
  double logfp_lo = 0.0;
  double logfp_hi = 0.0;
  double logfp_est = 0.0;
};

class Certificate;
using CertPtr = std::shared_ptr<const Certificate>;

// Finitely supported description of an invariant measure: a Markov kernel on
// a finite subsystem, a Dirac mass on a periodic orbit, or a finite convex
// mixture.  Entropy, Lyapunov exponent, observable integrals and dimension
// are cached at construction and re-derivable from the stored data.
class Certificate {
 public:
  enum class Type { kMarkov, kPeriodic, kMixture, kProjected };

  Type type = Type::kMarkov;
  std::string map_name;

  // Markov kernel data.
  std::vector<Symbol> subalphabet;
  int depth = 1;
  std::vector<Word> states;
  std::vector<std::vector<CertEdge>> edges;  // rows sum to 1
  std::vector<double> stationary;

  // Periodic orbit data.
  Word periodic_word;
  std::vector<double> orbit;

  // Mixture data; a projected certificate stores its induced-side source as
  // the single component together with the mean return time.
  std::vector<std::pair<double, CertPtr>> components;
  double tau_mean = 1.0;

  // Cached quantities.
  double h = 0.0;  // exact Shannon entropy rate (nats)
  ValueBracket chi;
  std::map<std::string, ValueBracket> integrals;
  ValueBracket dim;
  bool dim_indeterminate = false;

  std::string id() const;  // content hash, used by the result store
  std::string to_json() const;
  static CertPtr from_json(const std::string& text);
};

// Constructors ---------------------------------------------------------------

// Markov certificate from an explicit kernel on depth-d states.  The kernel
// rows must sum to 1 over admissible transitions; the stationary vector is
// refined by averaged power iteration to residual <= 1e-12.  log|f'| edge
// data is computed from (d+1)-cylinder brackets unless supplied.
CertPtr make_markov_cert(const MarkovMap& map, const std::vector<Symbol>& subalphabet,
                         int depth, std::vector<Word> states,
                         std::vector<std::vector<CertEdge>> edges,
                         const std::vector<Observable>& observables = {});

// Bernoulli/depth-1 convenience: full kernel with row = `probs` over the
// subalphabet (requires a full shift on the subalphabet).
CertPtr make_bernoulli_cert(const MarkovMap& map, const std::vector<Symbol>& subalphabet,
                            const std::vector<double>& probs,
                            const std::vector<Observable>& observables = {});

// Dirac mass on the periodic orbit coded by a primitive word.  Orbit points
// are fixed points of the cyclically rotated inverse-branch compositions.
CertPtr make_periodic_cert(const MarkovMap& map, const Word& w,
                           const std::vector<Observable>& observables = {});

// Convex mixture; entropy/Lyapunov/integrals combine affinely, dimension is
// recomputed from the mixed h and chi (never averaged).
CertPtr mix(const std::vector<std::pair<double, CertPtr>>& components);

// Operations -----------------------------------------------------------------

double entropy(const Certificate& c);
ValueBracket lyapunov(const Certificate& c);
// Integral of an observable; exact for locally constant observables resolved
// by the certificate's depth (the kernel is lifted when the observable is
// deeper).
ValueBracket integrate(const Certificate& c, const MarkovMap& map, const Observable& phi);

struct DimensionValue {
  ValueBracket value;
  bool indeterminate = false;  // chi bracket straddles 0 with h > 0
};

DimensionValue dimension(const Certificate& c);
ValueBracket free_energy(const Certificate& c, double beta);

// Stationarity residual ||pQ - p||_inf (diagnostic / verify path).
double stationarity_residual(const Certificate& c);

}  // namespace thermospec

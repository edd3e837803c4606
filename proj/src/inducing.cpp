#include "thermospec/inducing.hpp"

#include "thermospec/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "json.hpp"

namespace thermospec {

// Scheme assembly --------------------------------------------------------------

std::string PatternGenerator::to_json() const {
  nlohmann::json j;
  j["prefix_symbol"] = prefix_symbol;
  j["repeat_range"] = nlohmann::json::array({repeat_lo, repeat_hi});
  j["suffix_set"] = suffix_set;
  j["tau_from_end"] = tau_from_end;
  return j.dump();
}

std::string InducingScheme::to_json() const {
  nlohmann::json j;
  j["base"] = base->name();
  j["patterns"] = nlohmann::json::array();
  for (const auto& g : generators) j["patterns"].push_back(nlohmann::json::parse(g.to_json()));
  j["truncation"] = generators.empty() ? 0 : generators.front().repeat_hi;
  return j.dump();
}

InducingScheme scheme_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  auto base = map_by_name(j.at("base").get<std::string>());
  std::vector<PatternGenerator> gens;
  for (const auto& gj : j.at("patterns")) {
    PatternGenerator g;
    g.prefix_symbol = gj.at("prefix_symbol").get<Symbol>();
    g.repeat_lo = gj.at("repeat_range").at(0).get<int>();
    g.repeat_hi = gj.at("repeat_range").at(1).get<int>();
    g.suffix_set = gj.at("suffix_set").get<std::vector<Symbol>>();
    g.tau_from_end = gj.value("tau_from_end", 0);
    gens.push_back(std::move(g));
  }
  return build_jump_transform(base, std::move(gens));
}

namespace {

Branch make_induced_branch(const MarkovMap& base, Symbol induced_symbol,
                           const InducedPattern& pat) {
  const Word& w = pat.word;
  const int tau = pat.tau;
  Branch b;
  b.symbol = induced_symbol;
  const CylinderEnclosure cyl = cylinder(base, w);
  b.domain = cyl.box;
  b.domain_lo_rat = cyl.lo_rat;
  b.domain_hi_rat = cyl.hi_rat;

  const MarkovMap* bp = &base;
  const Word prefix(w.begin(), w.begin() + tau);

  b.forward = [bp, prefix](double x) {
    for (Symbol s : prefix) x = bp->branch(s).forward(x);
    return x;
  };
  b.dforward = [bp, prefix](double x) {
    double d = 1.0;
    for (Symbol s : prefix) {
      d *= bp->branch(s).dforward(x);
      x = bp->branch(s).forward(x);
    }
    return d;
  };
  b.inverse = [bp, prefix](double y) {
    for (size_t j = prefix.size(); j-- > 0;) y = bp->branch(prefix[j]).inverse(y);
    return y;
  };

  MobiusZ prod = MobiusZ::identity();
  bool exact = true;
  for (Symbol s : prefix) {
    const Branch& br = bp->branch(s);
    if (!br.inverse_mobius) {
      exact = false;
      break;
    }
    prod = prod.compose(*br.inverse_mobius);
    exact = prod.ok;
  }
  if (exact) {
    b.inverse_mobius = prod;
    b.inverse_enclosure = [prod](const Interval& y) { return prod.apply(y); };
    // |f~'(x)| = 1 / |g'(f~ x)| with g the composed inverse Mobius; the
    // inverse derivative is monotone, so endpoint evaluation of the image
    // interval gives the range.
    auto fwd = b.forward;
    b.abs_derivative_range_fn = [prod, fwd](const Interval& sub) {
      const double y1 = fwd(sub.lo), y2 = fwd(sub.hi);
      const Interval img = widen(Interval::hull(y1, y2));
      const Interval ginv = prod.abs_derivative(img);
      return widen(Interval{1.0 / ginv.hi, 1.0 / ginv.lo});
    };
  } else {
    b.inverse_enclosure = [bp, prefix](const Interval& y) {
      Interval v = y;
      for (size_t j = prefix.size(); j-- > 0;) v = bp->branch(prefix[j]).inverse_enclosure(v);
      return widen(v);
    };
    b.abs_dforward_monotone = false;
  }
  b.increasing = b.forward(b.domain.lo + 0.25 * b.domain.width()) <
                 b.forward(b.domain.lo + 0.75 * b.domain.width());
  b.closed_left = true;
  b.closed_right = false;
  b.has_d2 = false;
  return b;
}

}  // namespace

InducingScheme build_jump_transform(MarkovMapPtr base,
                                    std::vector<PatternGenerator> generators) {
  InducingScheme sch;
  sch.base = base;
  sch.generators = std::move(generators);

  for (const auto& g : sch.generators) {
    if (g.repeat_lo < 0 || g.repeat_hi < g.repeat_lo)
      throw SchemeValidationError("invalid repeat range");
    for (int k = g.repeat_lo; k <= g.repeat_hi; ++k) {
      for (Symbol a : g.suffix_set) {
        InducedPattern p;
        p.word = Word(k, g.prefix_symbol);
        p.word.push_back(a);
        p.tau = static_cast<int>(p.word.size()) - g.tau_from_end;
        if (p.tau < 1) throw SchemeValidationError("pattern with tau < 1");
        if (!is_admissible(p.word, base->rule()))
          throw SchemeValidationError("inadmissible pattern word " + word_to_string(p.word));
        sch.patterns.push_back(std::move(p));
      }
    }
  }
  if (sch.patterns.empty()) throw SchemeValidationError("no patterns");

  // Condition (ii): return orbits avoid neutral fixed points.
  for (const auto& p : sch.patterns) {
    for (int j = 0; j < p.tau; ++j) {
      const Word sub(p.word.begin() + j, p.word.end());
      const CylinderEnclosure cyl = cylinder(*base, sub);
      for (const auto& [a, xa] : base->neutral()) {
        (void)a;
        if (cyl.box.lo + 1e-14 < xa && xa < cyl.box.hi - 1e-14)
          throw SchemeValidationError("return orbit of pattern " + word_to_string(p.word) +
                                      " passes through a neutral fixed point");
      }
    }
  }
  sch.transcript.push_back("neutral-avoidance: ok on " + std::to_string(sch.patterns.size()) +
                           " patterns");

  // Condition (i)-style: pattern cylinders have pairwise disjoint interiors.
  {
    std::vector<std::pair<Interval, size_t>> boxes;
    for (size_t i = 0; i < sch.patterns.size(); ++i)
      boxes.emplace_back(cylinder(*base, sch.patterns[i].word).box, i);
    std::sort(boxes.begin(), boxes.end(),
              [](const auto& x, const auto& y) { return x.first.lo < y.first.lo; });
    for (size_t i = 0; i + 1 < boxes.size(); ++i) {
      if (boxes[i].first.hi > boxes[i + 1].first.lo + 1e-12)
        throw SchemeValidationError(
            "pattern cylinders overlap: " + word_to_string(sch.patterns[boxes[i].second].word) +
            " and " + word_to_string(sch.patterns[boxes[i + 1].second].word));
    }
    sch.transcript.push_back("disjoint-interiors: ok");
  }

  // Assemble the induced map.
  std::vector<Branch> branches;
  for (size_t i = 0; i < sch.patterns.size(); ++i)
    branches.push_back(make_induced_branch(*base, static_cast<Symbol>(i), sch.patterns[i]));

  bool fully = true;
  for (const auto& p : sch.patterns) fully = fully && p.tau == static_cast<int>(p.word.size());
  sch.fully_branched = fully;

  TransitionRule rule = TransitionRule::full_shift();
  if (!fully) {
    const size_t n = sch.patterns.size();
    std::vector<std::vector<int>> t(n, std::vector<int>(n, 0));
    for (size_t i = 0; i < n; ++i) {
      const Word tail(sch.patterns[i].word.begin() + sch.patterns[i].tau,
                      sch.patterns[i].word.end());
      for (size_t j = 0; j < n; ++j) {
        const Word& wj = sch.patterns[j].word;
        if (tail.size() <= wj.size() && std::equal(tail.begin(), tail.end(), wj.begin()))
          t[i][j] = 1;
      }
    }
    std::vector<Symbol> ids(n);
    for (size_t i = 0; i < n; ++i) ids[i] = static_cast<Symbol>(i);
    rule = TransitionRule::from_matrix(ids, t);
  }

  sch.induced = make_finite_map("induced:" + base->name(), base->ambient(),
                                std::move(branches), rule, fully);

  // Expansion: inf |f~'| >= 1 per branch and inf |(f~^2)'| > 1 over pairs.
  double min_branch = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < sch.patterns.size(); ++i)
    min_branch = std::min(min_branch, sch.induced->inf_abs_derivative(static_cast<Symbol>(i)));
  if (min_branch < 1.0 - 1e-9) throw SchemeValidationError("induced branch with |f~'| < 1");
  double min_square = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < sch.patterns.size(); ++i) {
    const double di = sch.induced->inf_abs_derivative(static_cast<Symbol>(i));
    for (size_t j = 0; j < sch.patterns.size(); ++j) {
      if (!sch.induced->rule().allowed(static_cast<Symbol>(i), static_cast<Symbol>(j))) continue;
      min_square =
          std::min(min_square, di * sch.induced->inf_abs_derivative(static_cast<Symbol>(j)));
    }
  }
  if (min_square <= 1.0 + 1e-12)
    throw SchemeValidationError("induced second iterate is not uniformly expanding");
  {
    std::ostringstream os;
    os << "expansion: inf|f~'| = " << min_branch << ", inf|(f~^2)'| >= " << min_square;
    sch.transcript.push_back(os.str());
  }

  // Finite irreducibility of the truncated induced rule.
  {
    std::vector<Symbol> ids(sch.patterns.size());
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<Symbol>(i);
    const auto irr = check_finite_irreducibility(sch.induced->rule(), ids, 2);
    if (!irr.ok())
      throw SchemeValidationError("induced rule is not irreducible on the truncation");
    sch.transcript.push_back("finite-irreducibility: bridge set of size " +
                             std::to_string(irr.certificate->bridges.size()));
  }

  return sch;
}

InducingScheme renyi_jump_scheme(int k_max, Symbol a_max) {
  if (a_max < 2) throw InputError("renyi jump scheme needs a_max >= 2");
  PatternGenerator g;
  g.prefix_symbol = 1;
  g.repeat_lo = 0;
  g.repeat_hi = k_max;
  for (Symbol a = 2; a <= a_max; ++a) g.suffix_set.push_back(a);
  g.tau_from_end = 0;
  return build_jump_transform(builtin_renyi(), {g});
}

Observable InducingScheme::tau_observable() const {
  std::map<Word, double> table;
  for (size_t i = 0; i < patterns.size(); ++i)
    table[{static_cast<Symbol>(i)}] = static_cast<double>(patterns[i].tau);
  Observable o = Observable::locally_constant(1, std::move(table), 1.0, "tau");
  return o;
}

Observable InducingScheme::lift_observable(const Observable& phi) const {
  if (phi.kind == Observable::Kind::kLogDerivative)
    throw InputError("lift of log|f'| is the induced log-derivative; use it directly");
  std::map<Word, double> table;
  for (size_t i = 0; i < patterns.size(); ++i) {
    const auto& p = patterns[i];
    if (static_cast<int>(p.word.size()) < p.tau + phi.depth - 1)
      throw InputError("observable " + phi.name +
                       " is not resolved along the return orbit; refine depth");
    double s = 0.0;
    for (int j = 0; j < p.tau; ++j) {
      Word window(p.word.begin() + j, p.word.begin() + j + phi.depth);
      s += phi.value_on(window);
    }
    table[{static_cast<Symbol>(i)}] = s;
  }
  Observable o = Observable::locally_constant(1, std::move(table), 0.0, "S_tau:" + phi.name);
  o.bounded = phi.bounded;
  return o;
}

// Distortion ------------------------------------------------------------------

DistortionEstimate estimate_distortion_constant(const InducingScheme& scheme, int truncation,
                                                int pairs) {
  DistortionEstimate out;
  out.truncation = truncation;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = std::min<int>(truncation, static_cast<int>(scheme.patterns.size()));
  for (int i = 0; i < n; ++i) {
    const Branch& b = scheme.induced->branch(static_cast<Symbol>(i));
    const int per_branch = std::max(4, pairs / std::max(1, n));
    for (int trial = 0; trial < per_branch; ++trial) {
      const double x = b.domain.lo + b.domain.width() * unif(rng);
      const double y = b.domain.lo + b.domain.width() * unif(rng);
      const double fx = b.forward(x), fy = b.forward(y);
      if (std::abs(fx - fy) < 1e-12) continue;
      const double ratio =
          std::abs(std::log(std::abs(b.dforward(x)) / std::abs(b.dforward(y)))) /
          std::abs(fx - fy);
      out.sampled = std::max(out.sampled, ratio);
    }
  }

  if (scheme.base->name() == "renyi") {
    // Parabolic block recipe: C0 = sup |f''| over the closed neutral branch
    // domain, C = C0 e^{2 C0} / |f(I_1)| with I_1 the outermost pull-back of
    // the domain's right endpoint.
    const Branch& b1 = scheme.base->branch(1);
    const double c0 = std::abs(b1.d2forward(b1.domain.hi));
    const double right = b1.domain.hi;
    const double pull = b1.inverse(right);
    const double g_i1 = b1.forward(right) - b1.forward(pull);
    out.c0 = c0;
    out.closed_form = c0 * std::exp(2.0 * c0) / g_i1;
  }
  return out;
}

// Abramov-Kac projection -------------------------------------------------------

CertPtr project_measure(const InducingScheme& scheme, const CertPtr& induced_cert,
                        const std::vector<Observable>& base_observables) {
  if (!induced_cert) throw InputError("null induced certificate");
  const Observable tau = scheme.tau_observable();
  const ValueBracket tau_int = integrate(*induced_cert, *scheme.induced, tau);
  if (tau_int.est <= 0) throw InputError("nonpositive mean return time");
  const double T = tau_int.est;

  auto c = std::make_shared<Certificate>();
  c->type = Certificate::Type::kProjected;
  c->map_name = scheme.base->name();
  c->components = {{1.0, induced_cert}};
  c->tau_mean = T;

  c->h = induced_cert->h / T;
  c->chi = {induced_cert->chi.lo / T, induced_cert->chi.hi / T, induced_cert->chi.est / T};
  for (const Observable& phi : base_observables) {
    const Observable lifted = scheme.lift_observable(phi);
    const ValueBracket v = integrate(*induced_cert, *scheme.induced, lifted);
    c->integrals[phi.name] = {v.lo / T, v.hi / T, v.est / T};
  }
  if (c->chi.hi <= 1e-15) {
    c->dim = {0.0, 0.0, 0.0};
  } else if (c->chi.lo <= 0.0) {
    c->dim_indeterminate = c->h > 0;
    c->dim = {0.0, 1.0, c->chi.est > 0 ? std::min(1.0, c->h / c->chi.est) : 0.0};
  } else {
    c->dim.lo = std::max(0.0, std::min(1.0, c->h / c->chi.hi));
    c->dim.hi = std::max(0.0, std::min(1.0, c->h / c->chi.lo));
    c->dim.est = std::max(0.0, std::min(1.0, c->h / c->chi.est));
  }
  return c;
}

// Parabolic Bowen root ---------------------------------------------------------

namespace {

struct MatD {
  double a = 1, b = 0, c = 0, d = 1;
};

MatD matd_of(const MobiusZ& m) {
  return {static_cast<double>(m.a), static_cast<double>(m.b), static_cast<double>(m.c),
          static_cast<double>(m.d)};
}

MatD matd_mul(const MatD& x, const MatD& y) {
  return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c,
          x.c * y.b + x.d * y.d};
}

double matd_apply(const MatD& m, double y) { return (m.a * y + m.b) / (m.c * y + m.d); }

// Adaptive cell of the induced full shift.  Every cell is
// prefix . (neutral block)^k . suffix-branch for k in [k1, k2] (k2 = -1 means
// an infinite tail); singleton ranges are exact cells.  The transfer weight
// of cell u against a point y in the next cell's cylinder is
//   sum_k |(prefix g1^k ga)'(y)|^t = sum_k (alpha(y) k + beta(y))^{-2t},
// alpha, beta linear in y from the bottom rows of prefix*Ga and prefix*N*Ga,
// where N = G1 - I is nilpotent for a parabolic block.
struct PCell {
  double C0 = 0, D0 = 0, C1 = 0, D1 = 0;
  long long k1 = 0, k2 = 0;  // k2 = -1: infinite tail
  double y_lo = 0, y_hi = 0, y_rep = 0;
};

struct WeightEval {
  double lo = 0, hi = 0, est = 0, dest = 0;
};

// sum_{k=k1..k2} (alpha k + beta)^{-2t}.  Remainders past a few exact terms
// are bracketed by the monotone integral bounds; the point estimate uses the
// midpoint rule, whose error is second order and stays inside the bracket.
// d/dt of the point estimate is tracked for Newton steps.
WeightEval lump_sum(double alpha, double beta, long long k1, long long k2, double t) {
  WeightEval w;
  const double e = 2.0 * t;
  if (!(alpha > 0.0) || !(alpha * static_cast<double>(k1) + beta > 0.0)) {
    // Degenerate denominator data; treat as a divergent contribution so the
    // root search stays above it.
    w.lo = w.hi = w.est = 1e300;
    return w;
  }
  // term(k) = exp(-e log u) with u = alpha k + beta; its t-derivative
  // -2 log(u) term(k) reuses the same logarithm.
  auto term_pair = [&](double k, double* dval) {
    const double lu = std::log(alpha * k + beta);
    const double v = std::exp(-e * lu);
    if (dval) *dval = -2.0 * lu * v;
    return v;
  };
  if (k1 == k2) {  // singleton: one exact branch weight
    w.lo = w.hi = w.est = term_pair(static_cast<double>(k1), &w.dest);
    return w;
  }
  const long long kexact = (k2 >= 0) ? std::min(k2, k1 + 3) : k1 + 3;
  for (long long k = k1; k <= kexact; ++k) {
    double d;
    const double v = term_pair(static_cast<double>(k), &d);
    w.lo += v;
    w.hi += v;
    w.est += v;
    w.dest += d;
  }
  if (k2 >= 0 && kexact >= k2) return w;

  const double m = static_cast<double>(kexact + 1);
  if (e <= 1.0 + 1e-9) {
    // Divergent tail: pressure is +infinity at this t.
    w.lo += 1e300;
    w.hi += 1e300;
    w.est += 1e300;
    return w;
  }
  // anti(k) = (alpha k + beta)^{1-e} / (alpha (1-e)); its t-derivative shares
  // the power and the logarithm.
  const double c1 = alpha * (1.0 - e);
  auto anti_pair = [&](double k, double* dval) {
    const double lu = std::log(alpha * k + beta);
    const double pw = std::exp((1.0 - e) * lu);
    const double v = pw / c1;
    if (dval) *dval = v * (-2.0 * lu) - pw * 2.0 / (c1 * (1.0 - e));
    return v;
  };
  double int_lo, int_hi, int_mid, dint_mid;
  if (k2 < 0) {
    int_lo = -anti_pair(m, nullptr);  // integral over [m, inf)
    int_hi = int_lo;
    double dm0;
    int_mid = -anti_pair(m - 0.5, &dm0);
    dint_mid = -dm0;
  } else {
    const double b = static_cast<double>(k2);
    const double am = anti_pair(m, nullptr);
    int_lo = anti_pair(b + 1.0, nullptr) - am;
    int_hi = anti_pair(b, nullptr) - am;
    double d1, d0;
    int_mid = anti_pair(b + 0.5, &d1) - anti_pair(m - 0.5, &d0);
    dint_mid = d1 - d0;
  }
  const double rem_lo = int_lo;  // integral over [m, k2+1] minorizes
  const double rem_hi = term_pair(m, nullptr) + int_hi;
  w.lo += rem_lo;
  w.hi += rem_hi;
  w.est += std::min(std::max(int_mid, rem_lo), rem_hi);
  w.dest += dint_mid;
  return w;
}

struct CellBuilder {
  MatD n_mat;            // G1 - I
  std::vector<MatD> ga;  // inverse matrices of the expanding branches
  double tau_cell = 1e-3;
  int max_cells = 3000;
  double neutral_fp = 0.0;
  std::vector<PCell> cells;
  bool truncated = false;

  Interval child_box(const MatD& pre, size_t ai, long long k) const {
    const MatD g1k{1.0 + k * n_mat.a, k * n_mat.b, k * n_mat.c, 1.0 + k * n_mat.d};
    const MatD m = matd_mul(matd_mul(pre, g1k), ga[ai]);
    const double p = matd_apply(m, 0.0), q = matd_apply(m, 1.0);
    return Interval::hull(p, q);
  }

  void emit(const MatD& pre, size_t ai, long long k1, long long k2) {
    PCell c;
    const MatD pg = matd_mul(pre, ga[ai]);
    const MatD png = matd_mul(matd_mul(pre, n_mat), ga[ai]);
    c.C0 = pg.c;
    c.D0 = pg.d;
    c.C1 = png.c;
    c.D1 = png.d;
    c.k1 = k1;
    c.k2 = k2;
    Interval box = child_box(pre, ai, k1);
    if (k2 < 0) {
      const double lim = matd_apply(pre, neutral_fp);
      box = Interval::hull(std::min(box.lo, lim), std::max(box.hi, lim));
    } else if (k2 > k1) {
      const Interval last = child_box(pre, ai, k2);
      box = {std::min(box.lo, last.lo), std::max(box.hi, last.hi)};
    }
    c.y_lo = box.lo;
    c.y_hi = box.hi;
    c.y_rep = box.mid();
    cells.push_back(c);
  }

  void expand(const MatD& pre, int depth) {
    for (size_t ai = 0; ai < ga.size(); ++ai) {
      long long k = 0;
      while (true) {
        if (static_cast<int>(cells.size()) >= max_cells) truncated = true;
        const Interval box = child_box(pre, ai, k);
        if (box.width() > tau_cell && depth < 40 && !truncated) {
          const MatD g1k{1.0 + k * n_mat.a, k * n_mat.b, k * n_mat.c, 1.0 + k * n_mat.d};
          expand(matd_mul(matd_mul(pre, g1k), ga[ai]), depth + 1);
          ++k;
          continue;
        }
        const double lim = matd_apply(pre, neutral_fp);
        const double tail_diam = std::max(box.hi, lim) - std::min(box.lo, lim);
        if (tail_diam <= tau_cell || truncated) {
          emit(pre, ai, k, -1);
          break;
        }
        long long k2 = k, step = 1;
        while (true) {
          const long long cand = k2 + step;
          const Interval cb = child_box(pre, ai, cand);
          const double d = std::max(box.hi, cb.hi) - std::min(box.lo, cb.lo);
          if (d <= tau_cell) {
            k2 = cand;
            step *= 2;
          } else if (step > 1) {
            step = 1;
          } else {
            break;
          }
        }
        emit(pre, ai, k, k2);
        k = k2 + 1;
      }
    }
  }
};

enum class WKind { kLo, kHi, kEst };

// Pressure evaluations for one cell family, with persistent matrix and
// eigenvector buffers; eigenvectors are warm-started across nearby t values.
struct CellPressure {
  const std::vector<PCell>* cells = nullptr;
  std::vector<double> m, dm, right, left, scratch;

  std::pair<double, double> eval(double t, WKind kind, bool want_derivative) {
    const auto& cs = *cells;
    const int n = static_cast<int>(cs.size());
    m.assign(static_cast<size_t>(n) * n, 0.0);
    if (want_derivative) dm.assign(static_cast<size_t>(n) * n, 0.0);

    // Target evaluation points, one per column.
    scratch.resize(n);
    for (int v = 0; v < n; ++v) {
      switch (kind) {
        case WKind::kLo: scratch[v] = cs[v].y_hi; break;
        case WKind::kHi: scratch[v] = cs[v].y_lo; break;
        default: scratch[v] = cs[v].y_rep; break;
      }
    }
    parallel_for(static_cast<size_t>(n), [&](size_t u_lo, size_t u_hi) {
      for (size_t u = u_lo; u < u_hi; ++u) {
        const PCell& cu = cs[u];
        double* row = &m[u * n];
        double* drow = want_derivative ? &dm[u * n] : nullptr;
        for (int v = 0; v < n; ++v) {
          const double y = scratch[v];
          const WeightEval w = lump_sum(cu.C1 * y + cu.D1, cu.C0 * y + cu.D0, cu.k1, cu.k2, t);
          switch (kind) {
            case WKind::kLo: row[v] = w.lo; break;
            case WKind::kHi: row[v] = w.hi; break;
            default: row[v] = w.est; break;
          }
          if (drow) drow[v] = w.dest;
        }
      }
    });

    const double lam = rho(right, false);
    if (!(lam > 0) || !std::isfinite(lam)) return {lam > 1 ? 1e300 : -1e300, -1.0};
    double dP = 0.0;
    if (want_derivative) {
      rho(left, true);
      double num = 0.0, den = 0.0;
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        const double* drow = &dm[static_cast<size_t>(i) * n];
        for (int j = 0; j < n; ++j) s += drow[j] * right[j];
        num += left[i] * s;
        den += left[i] * right[i];
      }
      dP = num / (lam * den);
    }
    return {std::log(lam), dP};
  }

 private:
  double rho(std::vector<double>& v, bool transpose) {
    const int n = static_cast<int>(cells->size());
    if (static_cast<int>(v.size()) != n) v.assign(n, 1.0);
    std::vector<double> next(n);
    double lam = 1.0;
    for (int it = 0; it < 600; ++it) {
      double cw_lo = std::numeric_limits<double>::infinity(), cw_hi = 0.0;
      if (!transpose) {
        for (int i = 0; i < n; ++i) {
          double s = 0.0;
          const double* row = &m[static_cast<size_t>(i) * n];
          for (int j = 0; j < n; ++j) s += row[j] * v[j];
          next[i] = s;
        }
      } else {
        std::fill(next.begin(), next.end(), 0.0);
        for (int i = 0; i < n; ++i) {
          const double* row = &m[static_cast<size_t>(i) * n];
          const double vi = v[i];
          for (int j = 0; j < n; ++j) next[j] += row[j] * vi;
        }
      }
      double norm = 0.0;
      for (int i = 0; i < n; ++i) {
        const double r = next[i] / v[i];
        cw_lo = std::min(cw_lo, r);
        cw_hi = std::max(cw_hi, r);
        norm = std::max(norm, next[i]);
      }
      if (!(norm > 0) || !std::isfinite(norm)) return norm;
      for (int i = 0; i < n; ++i) next[i] /= norm;
      v.swap(next);
      lam = 0.5 * (cw_lo + cw_hi);
      if (cw_hi - cw_lo <= 1e-12 * std::max(1.0, lam)) break;
    }
    return lam;
  }
};

double solve_root(CellPressure& cp, WKind kind, double t_tol, double warm, int& evals,
                  bool use_newton) {
  // P(t) is strictly decreasing where finite, and +infinity for 2t <= 1
  // because the parabolic tail diverges: the root lives in (1/2, hi].
  double lo = 0.505, hi = std::max(1.5, warm + 0.25);
  auto P = [&](double t, bool deriv) {
    ++evals;
    return cp.eval(t, kind, deriv);
  };
  double phi_hi = P(hi, false).first;
  int guard = 0;
  while (phi_hi > 0 && guard++ < 20) {
    hi *= 1.5;
    phi_hi = P(hi, false).first;
  }
  double t = std::min(std::max(warm, lo + 1e-6), hi - 1e-6);
  double prev_t = hi, prev_p = phi_hi;
  for (int it = 0; it < 60; ++it) {
    const auto [p, dp] = P(t, use_newton);
    if (p > 0)
      lo = t;
    else
      hi = t;
    double tn;
    if (use_newton && dp < -1e-12 && std::abs(p) < 1e100) {
      tn = t - p / dp;
    } else if (std::abs(p) < 1e100 && std::abs(prev_p) < 1e100 && p != prev_p) {
      tn = t - p * (prev_t - t) / (prev_p - p);  // secant
    } else {
      tn = 0.5 * (lo + hi);
    }
    if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
    prev_t = t;
    prev_p = p;
    if (std::abs(tn - t) < t_tol) return tn;
    t = tn;
  }
  return t;
}

}  // namespace

ParabolicRootResult parabolic_bowen_root(MarkovMapPtr base,
                                         const std::vector<Symbol>& subalphabet,
                                         ParabolicRootOptions opts) {
  ParabolicRootResult out;

  auto direct = [&]() {
    const auto sys = build_subsystem(base, subalphabet, 2);
    const auto root = bowen_root(sys);
    out.t = root.t;
    out.est = root.est;
    out.levels.push_back({0.0, root.t, root.est, static_cast<int>(sys.state_count()),
                          root.pressure_evals});
    return out;
  };

  if (base->neutral().empty()) return direct();

  const Symbol neutral = base->neutral().front().first;
  std::vector<Symbol> expanding;
  bool has_neutral = false;
  for (Symbol s : subalphabet) {
    if (s == neutral)
      has_neutral = true;
    else
      expanding.push_back(s);
  }
  if (!has_neutral) return direct();
  if (expanding.empty()) {
    // Only the neutral branch: the restricted limit set is one point.
    out.exact_zero = true;
    out.t = {0.0, 0.0};
    out.est = 0.0;
    return out;
  }

  const Branch& nb = base->branch(neutral);
  if (!nb.inverse_mobius)
    throw InputError("parabolic_bowen_root needs a Mobius neutral branch");
  const MatD g1 = matd_of(*nb.inverse_mobius);
  const MatD n_mat{g1.a - 1.0, g1.b, g1.c, g1.d - 1.0};
  {
    const MatD n2 = matd_mul(n_mat, n_mat);
    if (std::abs(n2.a) + std::abs(n2.b) + std::abs(n2.c) + std::abs(n2.d) > 1e-9)
      throw InputError("neutral branch is not parabolic; closed-form blocks unavailable");
  }

  CellBuilder cb;
  cb.n_mat = n_mat;
  cb.neutral_fp = base->neutral().front().second;
  cb.max_cells = opts.max_cells;
  std::sort(expanding.begin(), expanding.end());
  for (Symbol a : expanding) {
    const Branch& b = base->branch(a);
    if (!b.inverse_mobius)
      throw InputError("parabolic_bowen_root needs Mobius expanding branches");
    cb.ga.push_back(matd_of(*b.inverse_mobius));
  }

  std::vector<double> sizes = opts.cell_sizes;
  std::sort(sizes.begin(), sizes.end(), std::greater<double>());
  double warm = 0.8;
  for (double tau : sizes) {
    cb.cells.clear();
    cb.truncated = false;
    cb.tau_cell = tau;
    cb.expand(MatD{}, 0);
    ParabolicRootLevel lvl;
    lvl.cell_size = tau;
    lvl.cells = static_cast<int>(cb.cells.size());
    int evals = 0;
    CellPressure cp;
    cp.cells = &cb.cells;
    lvl.est = solve_root(cp, WKind::kEst, opts.root_tol, warm, evals, true);
    const double t_lo = solve_root(cp, WKind::kLo, 1e-4, lvl.est, evals, false);
    const double t_hi = solve_root(cp, WKind::kHi, 1e-4, lvl.est, evals, false);
    lvl.t = {std::min(t_lo, lvl.est), std::max(t_hi, lvl.est)};
    lvl.pressure_evals = evals;
    warm = lvl.est;
    out.levels.push_back(lvl);
  }
  out.t = out.levels.back().t;
  out.est = out.levels.back().est;
  return out;
}

}  // namespace thermospec

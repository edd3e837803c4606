#include "thermospec/fuchsian.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace thermospec {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

double norm_angle(double t) {
  t = std::fmod(t, kTwoPi);
  if (t < 0) t += kTwoPi;
  return t;
}
}  // namespace

// Mobius ------------------------------------------------------------------------

Mobius Mobius::uhp(double a, double b, double c, double d) {
  return Mobius{Cplx(a), Cplx(b), Cplx(c), Cplx(d)}.normalized();
}

Mobius Mobius::normalized() const {
  const Cplx s = std::sqrt(det());
  if (std::abs(s) < 1e-300) throw InputError("singular Mobius matrix");
  return {a / s, b / s, c / s, d / s};
}

Cplx Mobius::derivative(Cplx z) const {
  const Cplx t = c * z + d;
  return det() / (t * t);
}

Mobius Mobius::compose(const Mobius& r) const {
  return {a * r.a + b * r.c, a * r.b + b * r.d, c * r.a + d * r.c, c * r.b + d * r.d};
}

Mobius Mobius::to_disk() const {
  // Cayley C = [[1, -i], [1, i]] / sqrt(2i): C * g * C^{-1}.
  const Cplx i(0, 1);
  const Mobius cay{Cplx(1), -i, Cplx(1), i};
  const Mobius cay_inv{i, i, Cplx(-1), Cplx(1)};  // inverse up to scale
  return cay.compose(*this).compose(cay_inv).normalized();
}

Mobius::Class Mobius::classify(double tol) const {
  const double tr = std::abs(trace());
  if (std::abs(tr - 2.0) <= tol) return Class::kParabolic;
  return tr > 2.0 ? Class::kHyperbolic : Class::kElliptic;
}

std::vector<Cplx> Mobius::fixed_points() const {
  // c z^2 + (d - a) z - b = 0
  if (std::abs(c) < 1e-14) {
    if (std::abs(d - a) < 1e-14) return {};
    return {b / (d - a)};
  }
  const Cplx B = d - a, C = -b;
  const Cplx disc = B * B - 4.0 * c * C;
  const Cplx s = std::sqrt(disc);
  if (std::abs(s) < 1e-9) return {-B / (2.0 * c)};
  return {(-B + s) / (2.0 * c), (-B - s) / (2.0 * c)};
}

IsometricCircleResult isometric_circle(const Mobius& g) {
  const Mobius n = g.normalized();
  if (std::abs(n.c) < 1e-14)
    throw InputError("affine transformation has no isometric circle");
  return {-n.d / n.c, 1.0 / std::abs(n.c)};
}

// GeneratorSet --------------------------------------------------------------------

void GeneratorSet::validate() const {
  if (gens.size() < 4) throw InputError("non-elementary groups need #G0 >= 4");
  if (inverse_of.size() != gens.size()) throw InputError("incomplete inverse pairing");
  for (size_t i = 0; i < gens.size(); ++i) {
    const Mobius prod = gens[i].compose(gens[inverse_of[i]]);
    const double off = std::abs(prod.a - 1.0) + std::abs(prod.b) + std::abs(prod.c) +
                       std::abs(prod.d - 1.0);
    const double off_neg = std::abs(prod.a + 1.0) + std::abs(prod.b) + std::abs(prod.c) +
                           std::abs(prod.d + 1.0);
    if (std::min(off, off_neg) > 1e-9)
      throw InputError("generator set is not symmetric (inverse pairing failed)");
    if (std::abs(std::abs(gens[i].det()) - 1.0) > 1e-12)
      throw InputError("generators must be normalized to |det| = 1");
    if (parabolic[i] && gens[i].classify() != Mobius::Class::kParabolic)
      throw InputError("declared parabolic generator is not parabolic");
  }
}

GeneratorSet GeneratorSet::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  const std::string model = j.value("model", std::string("H"));
  GeneratorSet gs;
  std::vector<Mobius> base;
  for (const auto& m : j.at("matrices")) {
    if (model == "H") {
      base.push_back(Mobius::uhp(m.at(0).get<double>(), m.at(1).get<double>(),
                                 m.at(2).get<double>(), m.at(3).get<double>())
                         .to_disk());
    } else {
      auto cx = [&](int idx) {
        const auto& e = m.at(idx);
        if (e.is_array()) return Cplx(e.at(0).get<double>(), e.at(1).get<double>());
        return Cplx(e.get<double>(), 0.0);
      };
      base.push_back(Mobius{cx(0), cx(1), cx(2), cx(3)}.normalized());
    }
  }
  // Symmetric closure: append inverses.
  for (const Mobius& g : base) {
    gs.gens.push_back(g);
    gs.gens.push_back(g.inverse());
    gs.inverse_of.push_back(static_cast<int>(gs.gens.size()) - 1);
    gs.inverse_of.push_back(static_cast<int>(gs.gens.size()) - 2);
  }
  gs.parabolic.resize(gs.gens.size());
  gs.fixed_point.resize(gs.gens.size());
  gs.cusp_of.assign(gs.gens.size(), -1);
  for (size_t i = 0; i < gs.gens.size(); ++i) {
    gs.parabolic[i] = gs.gens[i].classify() == Mobius::Class::kParabolic;
    if (gs.parabolic[i]) {
      const auto fp = gs.gens[i].fixed_points();
      if (fp.empty()) throw InputError("parabolic generator without a fixed point");
      gs.fixed_point[i] = fp.front();
    }
  }
  // Cusp classes: parabolic pairs sharing a fixed point.
  for (size_t i = 0; i < gs.gens.size(); ++i) {
    if (!gs.parabolic[i] || gs.cusp_of[i] >= 0) continue;
    gs.cusp_of[i] = gs.num_cusps;
    gs.cusp_of[gs.inverse_of[i]] = gs.num_cusps;
    ++gs.num_cusps;
  }
  gs.validate();
  return gs;
}

GeneratorSet GeneratorSet::default_example() {
  return from_json(R"({"model": "H", "matrices": [[1, 3, 0, 1], [1, 0, 3, 1]]})");
}

// Bowen-Series map -----------------------------------------------------------------

namespace {

CircleArc arc_of_isometric_circle(const Mobius& g) {
  const auto ic = isometric_circle(g);
  const double ac = std::abs(ic.center);
  // |e^{it} - C|^2 = 1 + |C|^2 - 2|C| cos(t - arg C) <= r^2.
  const double cosw = (1.0 + ac * ac - ic.radius * ic.radius) / (2.0 * ac);
  if (cosw <= -1.0 || cosw >= 1.0)
    throw GeometryValidationError("isometric circle does not cut the boundary circle");
  const double w = std::acos(cosw);
  const double mid = std::arg(ic.center);
  CircleArc arc;
  arc.lo = norm_angle(mid - w);
  arc.hi = arc.lo + 2.0 * w;
  return arc;
}

// Angular |g'| on the arc: |g'(e^{it})| = 1/|c e^{it} + d|^2 is unimodal in t,
// so the range over a subarc is exact from the endpoints and the critical
// angle.
Interval arc_derivative_range(const Mobius& g, const Interval& sub) {
  auto val = [&](double t) { return std::abs(g.derivative(std::polar(1.0, t))); };
  double lo = std::min(val(sub.lo), val(sub.hi));
  double hi = std::max(val(sub.lo), val(sub.hi));
  // |c e^{it} + d|^2 is extremal at t = arg(d/c) (min of |g'|) and at
  // t = arg(d/c) + pi (max of |g'|).
  const double tmin = std::arg(g.d / g.c);
  for (const double crit : {tmin, tmin + kTwoPi / 2.0}) {
    for (int shift = -1; shift <= 1; ++shift) {
      const double t = norm_angle(crit) + shift * kTwoPi;
      if (t > sub.lo && t < sub.hi) {
        const double v = val(t);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  return widen(Interval{lo, hi});
}

Branch make_arc_branch(const Mobius& g, Symbol sym, const CircleArc& arc) {
  Branch b;
  b.symbol = sym;
  b.domain = {arc.lo, arc.hi};
  b.closed_left = true;
  b.closed_right = false;
  b.increasing = true;

  const Mobius ginv = g.inverse();
  b.forward = [g](double t) { return norm_angle(std::arg(g.apply(std::polar(1.0, t)))); };
  b.dforward = [g](double t) { return std::abs(g.derivative(std::polar(1.0, t))); };
  b.has_d2 = false;
  const double dlo = arc.lo;
  b.inverse = [ginv, dlo](double phi) {
    double t = norm_angle(std::arg(ginv.apply(std::polar(1.0, phi))));
    while (t < dlo - 1e-12) t += kTwoPi;
    return t;
  };
  auto inv_pt = b.inverse;
  b.inverse_enclosure = [inv_pt](const Interval& y) {
    const double p = inv_pt(y.lo), q = inv_pt(y.hi);
    return widen(Interval::hull(p, q));
  };
  b.abs_dforward_monotone = false;
  b.abs_derivative_range_fn = [g](const Interval& sub) { return arc_derivative_range(g, sub); };
  return b;
}

}  // namespace

BowenSeriesMap build_bowen_series(const GeneratorSet& gens) {
  gens.validate();
  BowenSeriesMap bs;
  bs.gens = gens;
  const size_t n = gens.gens.size();

  for (size_t i = 0; i < n; ++i) bs.arcs.push_back(arc_of_isometric_circle(gens.gens[i]));

  // Partition validation: closed arcs of non-inverse pairs may overlap only
  // in measure zero; inverse parabolic pairs touch exactly at the cusp.
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      double overlap = 0.0;
      for (int shift = -1; shift <= 1; ++shift) {
        const double lo = std::max(bs.arcs[i].lo, bs.arcs[j].lo + shift * kTwoPi);
        const double hi = std::min(bs.arcs[i].hi, bs.arcs[j].hi + shift * kTwoPi);
        overlap = std::max(overlap, hi - lo);
      }
      if (static_cast<int>(j) == gens.inverse_of[i] && gens.parabolic[i]) {
        if (overlap > 1e-9)
          throw GeometryValidationError("parabolic pair arcs overlap beyond the cusp point");
        // The touch point must be the parabolic fixed point.
        const double pj = norm_angle(std::arg(gens.fixed_point[i]));
        bool touches = false;
        for (const double t : {bs.arcs[i].lo, norm_angle(bs.arcs[i].hi)}) {
          if (std::abs(norm_angle(t - pj + kTwoPi / 2.0) - kTwoPi / 2.0) < 1e-9) touches = true;
        }
        if (!touches)
          throw GeometryValidationError(
              "parabolic pair does not meet at its fixed point (generators are not in the "
              "expected position)");
      } else if (overlap > 1e-9) {
        throw GeometryValidationError("arcs of generators " + std::to_string(i) + "," +
                                      std::to_string(j) + " overlap");
      }
    }
  }
  bs.transcript.push_back("arc partition: pairwise overlaps within tolerance");

  // Neutral data: each tracked cusp is fixed by its generator pair.
  std::vector<std::pair<Symbol, double>> neutral;
  for (size_t i = 0; i < n; ++i) {
    if (!gens.parabolic[i]) continue;
    const Cplx p = gens.fixed_point[i];
    const Cplx image = gens.gens[i].apply(p);
    if (std::abs(image - p) > 1e-9)
      throw GeometryValidationError("cusp point is not fixed by its generator");
    if (std::abs(std::abs(gens.gens[i].derivative(p)) - 1.0) > 1e-9)
      throw GeometryValidationError("|f'| != 1 at a cusp point");
    double theta = norm_angle(std::arg(p));
    // Use the representative inside this generator's arc window.
    if (theta < bs.arcs[i].lo - 1e-9) theta += kTwoPi;
    if (theta > bs.arcs[i].hi + 1e-9) theta -= kTwoPi;
    if (theta >= bs.arcs[i].lo - 1e-9 && theta <= bs.arcs[i].hi + 1e-9)
      neutral.emplace_back(static_cast<Symbol>(i), theta);
  }
  bs.transcript.push_back("cusps fixed by their generators: ok");

  std::vector<Branch> branches;
  for (size_t i = 0; i < n; ++i)
    branches.push_back(make_arc_branch(gens.gens[i], static_cast<Symbol>(i), bs.arcs[i]));

  auto inv = gens.inverse_of;
  TransitionRule rule = TransitionRule::forbid_pairs(
      [inv](Symbol s) { return static_cast<Symbol>(inv[static_cast<size_t>(s)]); });

  bs.facade = make_finite_map("bowen-series", Ambient::kCircle, std::move(branches), rule,
                              false, neutral);

  // Markov check: the image of each arc covers every non-inverse arc.
  for (size_t i = 0; i < n; ++i) {
    const Branch& br = bs.facade->branch(static_cast<Symbol>(i));
    const double im_lo = br.forward(bs.arcs[i].lo + 1e-12);
    const double im_hi = br.forward(bs.arcs[i].hi - 1e-12);
    // The image is the complement of the inverse arc; both image endpoints
    // must sit at the inverse arc's boundary.
    const CircleArc& dual = bs.arcs[static_cast<size_t>(gens.inverse_of[i])];
    const double gap_hi = std::abs(norm_angle(im_lo - norm_angle(dual.hi)));
    const double gap_lo = std::abs(norm_angle(norm_angle(dual.lo) - im_hi));
    if (std::min(gap_hi, kTwoPi - gap_hi) > 1e-6 || std::min(gap_lo, kTwoPi - gap_lo) > 1e-6)
      throw GeometryValidationError("arc image does not match the Markov picture");
  }
  bs.transcript.push_back("markov images: f(arc_g) = complement of arc_{g^-1}");

  return bs;
}

std::string BowenSeriesMap::arcs_csv() const {
  std::ostringstream os;
  os << "symbol,theta_lo,theta_hi\n";
  for (size_t i = 0; i < arcs.size(); ++i) {
    os.precision(17);
    os << i << "," << arcs[i].lo << "," << arcs[i].hi << "\n";
  }
  return os.str();
}

// Blocks ---------------------------------------------------------------------------

BlockSequence block_decompose(const std::vector<int>& word, const GeneratorSet& gens) {
  for (size_t j = 0; j + 1 < word.size(); ++j)
    if (gens.inverse_of[static_cast<size_t>(word[j])] == word[j + 1])
      throw InputError("word is not reduced at position " + std::to_string(j));
  BlockSequence seq;
  size_t i = 0;
  while (i < word.size()) {
    const int g = word[i];
    size_t run = 1;
    if (gens.parabolic[static_cast<size_t>(g)]) {
      while (i + run < word.size() && word[i + run] == g) ++run;
    }
    Block b;
    b.generator = g;
    b.run = static_cast<int>(run);
    if (gens.parabolic[static_cast<size_t>(g)]) {
      b.cusp = gens.cusp_of[static_cast<size_t>(g)];
      b.winding = static_cast<int>(run) - 1;
    }
    seq.blocks.push_back(b);
    i += run;
  }
  return seq;
}

std::vector<int> BlockSequence::concatenate() const {
  std::vector<int> word;
  for (const Block& b : blocks)
    for (int r = 0; r < b.run; ++r) word.push_back(b.generator);
  return word;
}

// Cusp-induced system ---------------------------------------------------------------

CuspInducedSystem build_cusp_induced_map(const BowenSeriesMap& bs, int winding_cutoff) {
  CuspInducedSystem out;
  out.winding_cutoff = winding_cutoff;
  std::vector<PatternGenerator> gens;
  const size_t n = bs.gens.gens.size();
  for (size_t i = 0; i < n; ++i) {
    PatternGenerator g;
    g.prefix_symbol = static_cast<Symbol>(i);
    g.repeat_lo = 1;
    g.repeat_hi = bs.gens.parabolic[i] ? winding_cutoff : 1;
    for (size_t j = 0; j < n; ++j) {
      if (static_cast<int>(j) == static_cast<int>(i)) continue;
      if (bs.gens.inverse_of[i] == static_cast<int>(j)) continue;
      g.suffix_set.push_back(static_cast<Symbol>(j));
    }
    g.tau_from_end = 1;  // the suffix letter is the lookahead, tau = block length
    gens.push_back(std::move(g));
  }
  out.scheme = build_jump_transform(bs.facade, std::move(gens));

  for (int j = 0; j < bs.gens.num_cusps; ++j) {
    std::map<Word, double> table;
    for (size_t i = 0; i < out.scheme.patterns.size(); ++i) {
      const auto& p = out.scheme.patterns[i];
      const int gidx = static_cast<int>(p.word.front());
      const int run = static_cast<int>(p.word.size()) - 1;
      double v = 0.0;
      if (bs.gens.parabolic[static_cast<size_t>(gidx)] &&
          bs.gens.cusp_of[static_cast<size_t>(gidx)] == j)
        v = static_cast<double>(run - 1);
      table[{static_cast<Symbol>(i)}] = v;
    }
    Observable o =
        Observable::locally_constant(1, std::move(table), 0.0, "a1_" + std::to_string(j + 1));
    o.bounded = false;  // windings grow without bound over the full alphabet
    out.windings.push_back(std::move(o));
  }
  return out;
}

// Spectra ---------------------------------------------------------------------------

SpectrumResult cusp_winding_spectrum(const BowenSeriesMap& bs, const std::vector<double>& alpha,
                                     const Schedule& schedule, int winding_cutoff,
                                     unsigned seed) {
  if (alpha.size() != static_cast<size_t>(bs.gens.num_cusps))
    throw InputError("winding spectrum needs one target per cusp");
  for (double a : alpha)
    if (a < 0) throw InputError("winding means are nonnegative");

  const auto sys = build_cusp_induced_map(bs, winding_cutoff);
  SpectrumQuery q;
  q.map = sys.scheme.induced;
  q.observables = sys.windings;
  q.targets = alpha;
  q.schedule = schedule;
  q.seed = seed;
  return birkhoff_spectrum(q);
}

SpectrumResult cusp_frequency_spectrum(const BowenSeriesMap& bs, const CuspFrequency& freq,
                                       const Schedule& schedule, int winding_cutoff,
                                       unsigned seed) {
  for (const auto& e : freq.entries) {
    if (e.freq < 0 || e.winding < 0 || e.cusp < 1 || e.cusp > bs.gens.num_cusps)
      throw InputError("invalid cusp frequency entry");
  }
  if (freq.tail < 0) throw InputError("declared tail mass must be nonnegative");
  if (freq.total() > 1.0 + 1e-12) throw InputError("cusp frequencies sum beyond 1");

  SpectrumResult res;
  if (freq.total() < 1.0 - 1e-12) {
    // Winding mass escapes: the dimension is exactly the beta_infinity floor
    // 1/2 of the induced system (arc lengths of gamma^n g decay like n^-2).
    res.exact = true;
    res.value = 0.5;
    res.lower_bound = 0.5;
    res.lower_bound_est = 0.5;
    res.beta_floor_applied = true;
    res.beta_floor = 0.5;
    res.provenance =
        "total declared winding frequency < 1: the dimension equals the induced-system "
        "beta_infinity = 1/2 exactly";
    return res;
  }

  const auto sys = build_cusp_induced_map(bs, winding_cutoff);
  SpectrumQuery q;
  q.map = sys.scheme.induced;
  q.schedule = schedule;
  q.seed = seed;
  for (const auto& e : freq.entries) {
    // Indicator of A_{i,j} = {a_{1,j} = i} over the induced alphabet.
    std::map<Word, double> table;
    for (size_t idx = 0; idx < sys.scheme.patterns.size(); ++idx) {
      const double w = sys.windings[static_cast<size_t>(e.cusp - 1)].value_on(
          {static_cast<Symbol>(idx)});
      table[{static_cast<Symbol>(idx)}] =
          (static_cast<int>(w) == e.winding) ? 1.0 : 0.0;
    }
    q.observables.push_back(Observable::locally_constant(
        1, std::move(table), 0.0,
        "A_" + std::to_string(e.winding) + "_" + std::to_string(e.cusp)));
    q.targets.push_back(e.freq);
  }
  res = birkhoff_spectrum(q);
  // The truncated induced alphabet is finite, so the generic floor logic sees
  // no constraint; the untruncated system has beta_infinity = 1/2.
  if (res.feasible) {
    res.beta_floor_applied = true;
    res.beta_floor = 0.5;
    if (res.lower_bound < 0.5) {
      res.lower_bound = 0.5;
      res.lower_bound_est = std::max(res.lower_bound_est, 0.5);
    }
    res.value = res.lower_bound;
    res.provenance += std::string(res.provenance.empty() ? "" : "; ") +
                      "beta_infinity = 1/2 floor of the untruncated induced system";
  }
  return res;
}

ArcDecayFit cusp_arc_decay(const BowenSeriesMap& bs, int gamma_index, int g_index, int n_max) {
  if (!bs.gens.parabolic[static_cast<size_t>(gamma_index)])
    throw InputError("arc decay needs a parabolic generator");
  if (g_index == gamma_index || bs.gens.inverse_of[static_cast<size_t>(gamma_index)] == g_index)
    throw InputError("suffix generator must differ from gamma^{+-1}");
  ArcDecayFit fit;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<std::pair<double, double>> pts;
  for (int n = 1; n <= n_max; ++n) {
    Word w(static_cast<size_t>(n), static_cast<Symbol>(gamma_index));
    w.push_back(static_cast<Symbol>(g_index));
    const auto cyl = cylinder(*bs.facade, w);
    const double d = cyl.diameter();
    if (d <= 0) continue;
    const double x = std::log(static_cast<double>(n)), y = std::log(d);
    pts.emplace_back(x, y);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const int m = static_cast<int>(pts.size());
  if (m < 4) throw InputError("not enough arc samples for the decay fit");
  fit.samples = m;
  fit.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double inter = (sy - fit.slope * sx) / m;
  double ss = 0.0;
  for (const auto& [x, y] : pts) {
    const double r = y - (inter + fit.slope * x);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / m);
  return fit;
}

}  // namespace thermospec

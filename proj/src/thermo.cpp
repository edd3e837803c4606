#include "thermospec/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

namespace thermospec {

size_t FiniteSubsystem::edge_count() const {
  size_t n = 0;
  for (const auto& row : edges) n += row.size();
  return n;
}

FiniteSubsystem build_subsystem(MarkovMapPtr map, const std::vector<Symbol>& subalphabet,
                                int depth, bool check_irreducibility) {
  if (subalphabet.empty()) throw InputError("empty subalphabet");
  if (depth < 1) throw InputError("subsystem depth must be >= 1");
  FiniteSubsystem sys;
  sys.map = map;
  sys.subalphabet = subalphabet;
  std::sort(sys.subalphabet.begin(), sys.subalphabet.end());
  sys.depth = depth;

  std::vector<Word> states = enumerate_words(map->rule(), sys.subalphabet, depth);

  // Prune states without admissible successors inside the state set, to a
  // fixed point.
  std::map<Word, int> index;
  std::vector<bool> alive(states.size(), true);
  for (size_t i = 0; i < states.size(); ++i) index[states[i]] = static_cast<int>(i);
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 0; i < states.size(); ++i) {
      if (!alive[i]) continue;
      bool has_succ = false;
      for (Symbol s : map->rule().successors(states[i].back(), sys.subalphabet)) {
        Word next(states[i].begin() + 1, states[i].end());
        next.push_back(s);
        auto it = index.find(next);
        if (it != index.end() && alive[it->second]) {
          has_succ = true;
          break;
        }
      }
      if (!has_succ) {
        alive[i] = false;
        sys.pruned_any = true;
        changed = true;
      }
    }
  }

  std::vector<int> remap(states.size(), -1);
  for (size_t i = 0; i < states.size(); ++i) {
    if (alive[i]) {
      remap[i] = static_cast<int>(sys.states.size());
      sys.states.push_back(states[i]);
    }
  }
  if (sys.states.empty()) throw InputError("all states pruned: empty subsystem");

  sys.edges.resize(sys.states.size());
  for (size_t i = 0; i < states.size(); ++i) {
    if (!alive[i]) continue;
    const int si = remap[i];
    for (Symbol s : map->rule().successors(states[i].back(), sys.subalphabet)) {
      Word next(states[i].begin() + 1, states[i].end());
      next.push_back(s);
      auto it = index.find(next);
      if (it == index.end() || !alive[it->second]) continue;
      SubsystemEdge e;
      e.target = remap[it->second];
      e.word = states[i];
      e.word.push_back(s);
      const CylinderEnclosure cyl = cylinder(*map, e.word);
      e.diam = cyl.diameter();
      const Branch& b = map->branch(e.word.front());
      const Interval range = b.abs_derivative_range(cyl.box.intersect(b.domain));
      e.logfp = {std::log(std::max(range.lo, 1e-300)), std::log(range.hi)};
      const Word shifted(e.word.begin() + 1, e.word.end());
      const double dshift = cylinder(*map, shifted).diameter();
      // Mean-value estimate log(|shifted|/|word|) lies in the bracket; fall
      // back to the midpoint derivative when diameters degenerate.
      double est = (e.diam > 0 && dshift > 0) ? std::log(dshift / e.diam)
                                              : std::log(std::abs(b.dforward(cyl.representative())));
      est = std::min(std::max(est, e.logfp.lo), e.logfp.hi);
      e.logfp_est = est;
      sys.edges[si].push_back(std::move(e));
    }
  }

  if (check_irreducibility) {
    auto res = check_finite_irreducibility(map->rule(), sys.subalphabet, 2 * depth + 2);
    if (res.ok()) sys.irreducibility = std::move(res.certificate);
  }
  return sys;
}

Interval PotentialSpec::edge_bracket(const SubsystemEdge& e) const {
  Interval v(shift, shift);
  for (const auto& [q, phi] : linear) {
    if (phi.kind == Observable::Kind::kLogDerivative) {
      v = v + Interval(q) * e.logfp;
      continue;
    }
    v = v + Interval(q * phi.value_on(e.word));
  }
  if (beta != 0.0) v = v + Interval(-beta) * e.logfp;
  return v;
}

double PotentialSpec::edge_est(const SubsystemEdge& e) const {
  double v = shift - beta * e.logfp_est;
  for (const auto& [q, phi] : linear) {
    if (phi.kind == Observable::Kind::kLogDerivative)
      v += q * e.logfp_est;
    else
      v += q * phi.value_on(e.word);
  }
  return v;
}

// Perron data ------------------------------------------------------------------

PerronData perron(const std::vector<std::vector<std::pair<int, double>>>& rows, double tol,
                  int max_iters) {
  const size_t n = rows.size();
  PerronData out;
  out.right.assign(n, 1.0);
  out.left.assign(n, 1.0);

  // Scale by the max row sum and shift by the identity: the shifted matrix is
  // primitive whenever the graph is irreducible, so power iteration cannot
  // oscillate between periodic classes.
  double scale = 0.0;
  for (const auto& row : rows) {
    double s = 0.0;
    for (const auto& [t, w] : row) s += w;
    scale = std::max(scale, s);
  }
  if (scale <= 0.0) {
    out.lambda = 0.0;
    return out;
  }

  auto iterate = [&](std::vector<double>& v, bool transpose) {
    std::vector<double> next(n, 0.0);
    int iters = 0;
    double lam = 1.0;
    for (; iters < max_iters; ++iters) {
      std::fill(next.begin(), next.end(), 0.0);
      for (size_t i = 0; i < n; ++i) {
        for (const auto& [t, w] : rows[i]) {
          if (transpose)
            next[t] += (w / scale) * v[i];
          else
            next[i] += (w / scale) * v[t];
        }
      }
      // shifted: (M/scale + I) v
      double cw_lo = std::numeric_limits<double>::infinity(), cw_hi = 0.0;
      for (size_t i = 0; i < n; ++i) {
        next[i] += v[i];
        if (v[i] > 0) {
          const double r = next[i] / v[i];
          cw_lo = std::min(cw_lo, r);
          cw_hi = std::max(cw_hi, r);
        }
      }
      double norm = 0.0;
      for (double x : next) norm = std::max(norm, x);
      for (double& x : next) x /= norm;
      v.swap(next);
      lam = 0.5 * (cw_lo + cw_hi);
      if (!transpose) {
        out.lambda_lo = (cw_lo - 1.0) * scale;
        out.lambda_hi = (cw_hi - 1.0) * scale;
      }
      if (cw_hi - cw_lo <= tol * std::max(1.0, lam)) break;
    }
    if (!transpose) out.iterations = iters;
    return (lam - 1.0) * scale;
  };

  out.lambda = iterate(out.right, false);
  iterate(out.left, true);

  // Residual ||Mv - lambda v||_inf / ||v||_inf.
  std::vector<double> mv(n, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (const auto& [t, w] : rows[i]) mv[i] += w * out.right[t];
  double res = 0.0, vn = 0.0;
  for (size_t i = 0; i < n; ++i) {
    res = std::max(res, std::abs(mv[i] - out.lambda * out.right[i]));
    vn = std::max(vn, std::abs(out.right[i]));
  }
  out.residual = res / std::max(vn, 1e-300);
  return out;
}

// Strongly connected components (Tarjan, iterative).
static std::vector<int> scc_ids(const std::vector<std::vector<std::pair<int, double>>>& rows,
                                int& count) {
  const int n = static_cast<int>(rows.size());
  std::vector<int> ids(n, -1), low(n, 0), disc(n, -1), stk;
  std::vector<bool> on(n, false);
  int timer = 0;
  count = 0;

  struct Frame {
    int v;
    size_t ei;
  };
  for (int s = 0; s < n; ++s) {
    if (disc[s] != -1) continue;
    std::vector<Frame> frames{{s, 0}};
    disc[s] = low[s] = timer++;
    stk.push_back(s);
    on[s] = true;
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.ei < rows[f.v].size()) {
        const int w = rows[f.v][f.ei].first;
        ++f.ei;
        if (disc[w] == -1) {
          disc[w] = low[w] = timer++;
          stk.push_back(w);
          on[w] = true;
          frames.push_back({w, 0});
        } else if (on[w]) {
          low[f.v] = std::min(low[f.v], disc[w]);
        }
      } else {
        const int v = f.v;
        frames.pop_back();
        if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
        if (low[v] == disc[v]) {
          while (true) {
            const int w = stk.back();
            stk.pop_back();
            on[w] = false;
            ids[w] = count;
            if (w == v) break;
          }
          ++count;
        }
      }
    }
  }
  return ids;
}

namespace {

struct WeightedGraph {
  std::vector<std::vector<std::pair<int, double>>> rows;
};

enum class WeightKind { kLo, kHi, kEst };

WeightedGraph build_weights(const FiniteSubsystem& sys, const PotentialSpec& pot,
                            WeightKind kind) {
  WeightedGraph g;
  g.rows.resize(sys.states.size());
  for (size_t i = 0; i < sys.states.size(); ++i) {
    for (const SubsystemEdge& e : sys.edges[i]) {
      double phi;
      switch (kind) {
        case WeightKind::kLo: phi = pot.edge_bracket(e).lo; break;
        case WeightKind::kHi: phi = pot.edge_bracket(e).hi; break;
        default: phi = pot.edge_est(e); break;
      }
      g.rows[i].emplace_back(e.target, std::exp(phi));
    }
  }
  return g;
}

struct SpectralResult {
  double logrho = 0.0;
  double lambda = 0.0;
  PerronData perron_data;
  bool restricted = false;
  std::vector<int> dominant_nodes;  // empty when the whole graph is used
};

SpectralResult spectral(const WeightedGraph& g) {
  SpectralResult out;
  int ncomp = 0;
  const std::vector<int> ids = scc_ids(g.rows, ncomp);

  // Count nodes per component; a component is nontrivial if it has an
  // internal edge.
  std::vector<bool> nontrivial(ncomp, false);
  for (size_t i = 0; i < g.rows.size(); ++i)
    for (const auto& [t, w] : g.rows[i])
      if (ids[i] == ids[t]) nontrivial[ids[i]] = true;

  int live = 0;
  for (int c = 0; c < ncomp; ++c)
    if (nontrivial[c]) ++live;

  if (live <= 1 && ncomp == 1) {
    out.perron_data = perron(g.rows);
    out.lambda = out.perron_data.lambda;
    out.logrho = std::log(std::max(out.lambda, 1e-300));
    return out;
  }

  // Reducible: evaluate the dominant component.
  out.restricted = true;
  double best = -1.0;
  for (int c = 0; c < ncomp; ++c) {
    if (!nontrivial[c]) continue;
    std::vector<int> nodes, remap(g.rows.size(), -1);
    for (size_t i = 0; i < g.rows.size(); ++i)
      if (ids[i] == c) {
        remap[i] = static_cast<int>(nodes.size());
        nodes.push_back(static_cast<int>(i));
      }
    std::vector<std::vector<std::pair<int, double>>> sub(nodes.size());
    for (int i : nodes)
      for (const auto& [t, w] : g.rows[i])
        if (ids[t] == c) sub[remap[i]].emplace_back(remap[t], w);
    PerronData pd = perron(sub);
    if (pd.lambda > best) {
      best = pd.lambda;
      out.perron_data = std::move(pd);
      out.dominant_nodes = nodes;
    }
  }
  out.lambda = best;
  out.logrho = std::log(std::max(best, 1e-300));
  return out;
}

}  // namespace

double pressure_est(const FiniteSubsystem& sys, const PotentialSpec& pot) {
  return spectral(build_weights(sys, pot, WeightKind::kEst)).logrho;
}

PressureValue pressure(const FiniteSubsystem& sys, const PotentialSpec& pot) {
  PressureValue out;
  const SpectralResult lo = spectral(build_weights(sys, pot, WeightKind::kLo));
  const SpectralResult hi = spectral(build_weights(sys, pot, WeightKind::kHi));
  const SpectralResult est = spectral(build_weights(sys, pot, WeightKind::kEst));
  out.P = {lo.logrho, hi.logrho};
  out.P_est = est.logrho;
  out.lambda = est.lambda;
  out.iterations = est.perron_data.iterations;
  out.residual = est.perron_data.residual;
  out.restricted_to_dominant_scc = est.restricted;
  return out;
}

CertPtr equilibrium(const FiniteSubsystem& sys, const PotentialSpec& pot,
                    const std::vector<Observable>& observables) {
  const WeightedGraph g = build_weights(sys, pot, WeightKind::kEst);
  const SpectralResult sp = spectral(g);

  // Restrict to the dominant component when the graph is reducible.
  std::vector<int> nodes;
  if (sp.restricted) {
    nodes = sp.dominant_nodes;
  } else {
    nodes.resize(sys.states.size());
    std::iota(nodes.begin(), nodes.end(), 0);
  }
  std::vector<int> remap(sys.states.size(), -1);
  for (size_t i = 0; i < nodes.size(); ++i) remap[nodes[i]] = static_cast<int>(i);

  const std::vector<double>& v = sp.perron_data.right;
  const double lambda = sp.lambda;

  std::vector<Word> states;
  states.reserve(nodes.size());
  for (int i : nodes) states.push_back(sys.states[i]);

  std::vector<std::vector<CertEdge>> edges(nodes.size());
  for (size_t bi = 0; bi < nodes.size(); ++bi) {
    const int i = nodes[bi];
    double row = 0.0;
    std::vector<CertEdge> r;
    for (const SubsystemEdge& e : sys.edges[i]) {
      if (remap[e.target] < 0) continue;
      CertEdge ce;
      ce.target = remap[e.target];
      const double m = std::exp(pot.edge_est(e));
      const double vt = sp.restricted ? v[remap[e.target]] : v[e.target];
      const double vi = sp.restricted ? v[bi] : v[i];
      ce.prob = m * vt / (lambda * vi);
      ce.logfp_lo = e.logfp.lo;
      ce.logfp_hi = e.logfp.hi;
      ce.logfp_est = e.logfp_est;
      row += ce.prob;
      r.push_back(ce);
    }
    // Normalize away the eigen-residual so kernel rows sum to 1 exactly.
    for (CertEdge& ce : r) ce.prob /= row;
    edges[bi] = std::move(r);
  }

  return make_markov_cert(*sys.map, sys.subalphabet, sys.depth, std::move(states),
                          std::move(edges), observables);
}

BowenRoot bowen_root(const FiniteSubsystem& sys, double tol) {
  for (const auto& row : sys.edges)
    for (const SubsystemEdge& e : row)
      if (e.logfp.lo <= 0.0)
        throw ParabolicSubsystemError(
            "subsystem is not uniformly expanding on cylinder " + word_to_string(e.word) +
            "; route through the inducing module");

  BowenRoot out;
  int evals = 0;
  auto root_of = [&](WeightKind kind) {
    auto pval = [&](double beta) {
      ++evals;
      const WeightedGraph g = build_weights(sys, PotentialSpec::geometric(beta), kind);
      return spectral(g).logrho;
    };
    double lo = 0.0, hi = 1.0;
    double plo = pval(lo);
    if (plo <= 0.0) return 0.0;
    double phi = pval(hi);
    int guard = 0;
    while (phi > 0.0 && guard++ < 64) {
      hi *= 2.0;
      phi = pval(hi);
    }
    // Secant steps guarded by the bisection bracket.
    double prev = hi;
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
      double cand = 0.5 * (lo + hi);
      if (plo != phi) {
        const double sec = lo - plo * (hi - lo) / (phi - plo);
        // Every third step falls back to the midpoint so the bracket keeps
        // shrinking geometrically.
        if (sec > lo && sec < hi && it % 3 != 2) cand = sec;
      }
      const double pc = pval(cand);
      if (pc > 0.0) {
        lo = cand;
        plo = pc;
      } else {
        hi = cand;
        phi = pc;
      }
      if (std::abs(cand - prev) < tol || std::abs(pc) < 1e-15) return cand;
      prev = cand;
    }
    return 0.5 * (lo + hi);
  };

  const double t_lo = root_of(WeightKind::kLo);
  const double t_hi = root_of(WeightKind::kHi);
  out.est = root_of(WeightKind::kEst);
  out.t = {t_lo, t_hi};
  out.pressure_evals = evals;
  return out;
}

BetaInfinityResult beta_infinity(const MarkovMap& map, Symbol probe_lo, Symbol probe_hi,
                                 BetaInfinityMode mode) {
  BetaInfinityResult out;
  if (map.alphabet().is_finite()) {
    out.finite_alphabet = true;
    out.value = -std::numeric_limits<double>::infinity();
    out.mode = "finite-alphabet";
    return out;
  }
  if (mode == BetaInfinityMode::kClosedForm) {
    // Built-ins with diam(Delta_i) = 1/(i(i+1)) and inf|f'| = i^2: the series
    // sum_i (i^2)^{-beta} has convergence exponent 1/2.
    if (map.name() == "renyi" || map.name() == "gauss") {
      out.value = 0.5;
      out.exact = true;
      out.mode = "closed-form";
      return out;
    }
    mode = BetaInfinityMode::kFit;  // no closed form known; fall through
  }
  // Log-log regression of branch-domain diameter against index.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (Symbol a = probe_lo; a <= probe_hi; ++a) {
    if (!map.has_branch(a)) continue;
    const Branch& b = map.branch(a);
    const double d = b.domain.width();
    if (d <= 0) continue;
    const double x = std::log(static_cast<double>(a)), y = std::log(d);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 4) throw InputError("beta_infinity fit: not enough probe branches");
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double inter = (sy - slope * sx) / n;
  double ss = 0.0;
  for (Symbol a = probe_lo; a <= probe_hi; ++a) {
    if (!map.has_branch(a)) continue;
    const double d = map.branch(a).domain.width();
    if (d <= 0) continue;
    const double pred = inter + slope * std::log(static_cast<double>(a));
    ss += (std::log(d) - pred) * (std::log(d) - pred);
  }
  out.value = 1.0 / (-slope);
  out.fit_residual = std::sqrt(ss / n);
  out.mode = "fit";
  return out;
}

}  // namespace thermospec

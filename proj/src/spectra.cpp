#include "thermospec/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "json.hpp"
#include "thermospec/parallel.hpp"

namespace thermospec {

// Schedule ---------------------------------------------------------------------

std::string Schedule::to_json() const {
  nlohmann::json j;
  j["eps"] = eps;
  j["alphabets"] = nlohmann::json::array();
  for (const auto& [lo, hi] : alphabets) j["alphabets"].push_back({lo, hi});
  j["depths"] = depths;
  j["inducing"] = inducing;
  j["induced_k_cap"] = induced_k_cap;
  return j.dump();
}

Schedule Schedule::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Schedule s;
  if (j.contains("eps")) s.eps = j.at("eps").get<std::vector<double>>();
  if (j.contains("alphabets")) {
    s.alphabets.clear();
    for (const auto& a : j.at("alphabets"))
      s.alphabets.emplace_back(a.at(0).get<Symbol>(), a.at(1).get<Symbol>());
  }
  if (j.contains("depths")) s.depths = j.at("depths").get<std::vector<int>>();
  if (j.contains("inducing")) s.inducing = j.at("inducing").get<bool>();
  if (j.contains("induced_k_cap")) s.induced_k_cap = j.at("induced_k_cap").get<int>();
  for (size_t i = 1; i < s.eps.size(); ++i)
    if (s.eps[i] >= s.eps[i - 1]) throw InputError("eps schedule must be strictly decreasing");
  return s;
}

void FrequencyVector::validate() const {
  for (double v : head)
    if (v < 0) throw InputError("frequency vector entries must be nonnegative");
  if (tail < 0) throw InputError("declared tail mass must be nonnegative");
  if (total() > 1.0 + 1e-12) throw InputError("frequency vector sums beyond 1");
}

// Solver context -----------------------------------------------------------------

namespace {

// One schedule stage resolved into a uniformly expanding finite subsystem:
// either the map restricted to an expanding subalphabet, or the jump
// transform with lifted observables and the return-time weight.
struct SolverContext {
  FiniteSubsystem sys;
  std::vector<Observable> phis;  // resolved on sys (lifted for induced runs)
  Observable tau;                // constant 1 for direct systems
  std::optional<InducingScheme> scheme;
  bool induced = false;
  std::string label;
};

std::vector<Symbol> stage_subalphabet(const MarkovMap& map, Symbol lo, Symbol hi) {
  std::vector<Symbol> sub;
  if (map.alphabet().is_finite()) {
    sub = map.alphabet().ids();
    std::sort(sub.begin(), sub.end());
    return sub;
  }
  for (Symbol s = lo; s <= hi; ++s)
    if (map.has_branch(s)) sub.push_back(s);
  return sub;
}

Observable unit_tau() {
  Observable o;
  o.kind = Observable::Kind::kLocallyConstant;
  o.depth = 1;
  o.tail = Observable::Tail::kConstant;
  o.tail_constant = 1.0;
  o.name = "tau";
  return o;
}

SolverContext build_context(MarkovMapPtr map, const std::vector<Observable>& observables,
                            Symbol alo, Symbol ahi, int depth, const Schedule& sched) {
  SolverContext ctx;
  const std::vector<Symbol> sub = stage_subalphabet(*map, alo, ahi);
  if (sub.empty()) throw InputError("empty stage subalphabet");

  bool neutral_present = false;
  for (Symbol s : sub)
    if (map->is_neutral_index(s)) neutral_present = true;

  if (!neutral_present) {
    ctx.sys = build_subsystem(map, sub, depth);
    ctx.phis = observables;
    ctx.tau = unit_tau();
    std::ostringstream os;
    os << map->name() << " A=[" << sub.front() << ".." << sub.back() << "] d=" << depth;
    ctx.label = os.str();
    return ctx;
  }

  if (!sched.inducing)
    throw ParabolicSubsystemError(
        "stage subalphabet contains a neutral index and inducing is disabled");
  if (map->name() != "renyi")
    throw ParabolicSubsystemError(
        "automatic jump transform is only built in for the renyi map; construct an "
        "inducing scheme explicitly");

  const Symbol a_max = sub.back() < 2 ? 2 : sub.back();
  const int k_cap = std::max(4, sched.induced_k_cap);
  ctx.scheme = renyi_jump_scheme(k_cap, a_max);
  ctx.induced = true;
  std::vector<Symbol> ids(ctx.scheme->patterns.size());
  for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<Symbol>(i);
  ctx.sys = build_subsystem(ctx.scheme->induced, ids, 1);
  for (const Observable& phi : observables) {
    if (phi.kind == Observable::Kind::kLogDerivative)
      ctx.phis.push_back(Observable::log_derivative());  // induced log-derivative
    else
      ctx.phis.push_back(ctx.scheme->lift_observable(phi));
  }
  ctx.tau = ctx.scheme->tau_observable();
  std::ostringstream os;
  os << "induced:renyi a<=" << a_max << " k<=" << k_cap;
  ctx.label = os.str();
  return ctx;
}

// Certificate on the base map for a kernel on the context's subsystem
// (projection applied for induced runs).
CertPtr contextual_cert(const SolverContext& ctx, const CertPtr& sys_cert,
                        const std::vector<Observable>& base_observables) {
  if (!ctx.induced) return sys_cert;
  std::vector<Observable> liftable;
  for (const auto& phi : base_observables)
    if (phi.kind != Observable::Kind::kLogDerivative) liftable.push_back(phi);
  return project_measure(*ctx.scheme, sys_cert, liftable);
}

double cert_residual(const SolverContext& ctx, const CertPtr& cert,
                     const std::vector<Observable>& base_observables,
                     const std::vector<double>& targets) {
  double r = 0.0;
  for (size_t i = 0; i < base_observables.size(); ++i) {
    double v;
    if (base_observables[i].kind == Observable::Kind::kLogDerivative) {
      v = cert->chi.est;
    } else if (ctx.induced) {
      v = cert->integrals.at(base_observables[i].name).est;
    } else {
      v = integrate(*cert, *ctx.sys.map, base_observables[i]).est;
    }
    r = std::max(r, std::abs(v - targets[i]));
  }
  return r;
}

// Legendre backend ----------------------------------------------------------------

struct LegendreOutcome {
  CertPtr sys_cert;  // equilibrium on the solver system
  double T = 0.0;
  std::vector<double> q;
  bool converged = false;
};

PotentialSpec legendre_potential(const SolverContext& ctx, const std::vector<double>& q,
                                 const std::vector<double>& targets, double T) {
  PotentialSpec pot;
  double tau_coeff = 0.0;
  for (size_t i = 0; i < q.size(); ++i) {
    pot.linear.emplace_back(q[i], ctx.phis[i]);
    tau_coeff -= q[i] * targets[i];
  }
  pot.linear.emplace_back(tau_coeff, ctx.tau);
  pot.beta = T;
  return pot;
}

double legendre_T_of_q(const SolverContext& ctx, const std::vector<double>& q,
                       const std::vector<double>& targets, double warm) {
  auto P = [&](double T) { return pressure_est(ctx.sys, legendre_potential(ctx, q, targets, T)); };
  double lo = warm, hi = warm;
  double p0 = P(warm);
  int guard = 0;
  if (p0 > 0) {
    double ph = p0;
    while (ph > 0 && guard++ < 80) {
      hi += 0.5 * guard;
      ph = P(hi);
    }
    lo = hi - 0.5 * guard;
  } else {
    double pl = p0;
    while (pl <= 0 && guard++ < 80) {
      lo -= 0.5 * guard;
      pl = P(lo);
    }
    hi = lo + 0.5 * guard;
  }
  double plo2 = P(lo), phi2 = P(hi);
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 80; ++it) {
    const double pm = P(t);
    if (pm > 0) {
      lo = t;
      plo2 = pm;
    } else {
      hi = t;
      phi2 = pm;
    }
    double tn = 0.5 * (lo + hi);
    if (phi2 != plo2) {
      const double sec = lo - plo2 * (hi - lo) / (phi2 - plo2);
      if (sec > lo && sec < hi) tn = sec;
    }
    if (std::abs(tn - t) < 1e-12) return tn;
    t = tn;
  }
  return t;
}

LegendreOutcome legendre_solve(const SolverContext& ctx, const std::vector<double>& targets,
                               unsigned seed) {
  const size_t k = ctx.phis.size();
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  const bool small = ctx.sys.state_count() <= 64;
  const int starts = small ? 5 : 2;
  const int iters = small ? 200 : 30;

  LegendreOutcome best;
  best.T = std::numeric_limits<double>::infinity();

  for (int s = 0; s < starts; ++s) {
    std::vector<double> q(k, 0.0);
    if (s > 0)
      for (double& v : q) v = unif(rng);
    double T = legendre_T_of_q(ctx, q, targets, std::isfinite(best.T) ? best.T : 1.0);
    bool converged = false;
    double step = 1.0;
    for (int it = 0; it < iters; ++it) {
      const auto eq = equilibrium(ctx.sys, legendre_potential(ctx, q, targets, T), ctx.phis);
      const double tau_mean = integrate(*eq, *ctx.sys.map, ctx.tau).est;
      const double chi = eq->chi.est;
      std::vector<double> grad(k);
      double gnorm = 0.0;
      for (size_t i = 0; i < k; ++i) {
        const double phi_int = ctx.phis[i].kind == Observable::Kind::kLogDerivative
                                   ? eq->chi.est
                                   : integrate(*eq, *ctx.sys.map, ctx.phis[i]).est;
        grad[i] = (phi_int - targets[i] * tau_mean) / chi;
        gnorm = std::max(gnorm, std::abs(grad[i]));
      }
      if (gnorm < 1e-9) {
        converged = true;
        break;
      }
      bool moved = false;
      for (int bt = 0; bt < 25; ++bt) {
        std::vector<double> qn(k);
        for (size_t i = 0; i < k; ++i)
          qn[i] = std::clamp(q[i] - step * grad[i], -20.0, 20.0);
        const double Tn = legendre_T_of_q(ctx, qn, targets, T);
        if (Tn < T - 1e-15) {
          q = qn;
          T = Tn;
          moved = true;
          step = std::min(step * 1.6, 64.0);
          break;
        }
        step *= 0.5;
      }
      if (!moved) {
        converged = gnorm < 1e-6;
        break;
      }
    }
    if (T < best.T) {
      best.T = T;
      best.q = q;
      best.converged = converged;
    }
  }
  best.sys_cert = equilibrium(ctx.sys, legendre_potential(ctx, best.q, targets, best.T), ctx.phis);
  return best;
}

// Direct backend -------------------------------------------------------------------

struct DirectOutcome {
  CertPtr sys_cert;
  bool converged = false;
  bool skipped = false;
};

DirectOutcome direct_solve(const SolverContext& ctx, const std::vector<double>& targets,
                           double eps, unsigned seed) {
  DirectOutcome out;
  const size_t n = ctx.sys.state_count();
  size_t nparams = 0;
  for (const auto& row : ctx.sys.edges) nparams += row.size();
  if (n > 64 || nparams > 512) {
    out.skipped = true;  // kernel-space search is for small systems
    return out;
  }

  const size_t k = ctx.phis.size();
  std::vector<std::vector<double>> phi_edge(k);
  std::vector<double> tau_edge, logfp_edge;
  std::vector<int> row_of, col_target;
  std::vector<size_t> row_begin(n + 1, 0);
  for (size_t i = 0; i < n; ++i) {
    row_begin[i] = tau_edge.size();
    for (const SubsystemEdge& e : ctx.sys.edges[i]) {
      for (size_t c = 0; c < k; ++c)
        phi_edge[c].push_back(ctx.phis[c].kind == Observable::Kind::kLogDerivative
                                  ? e.logfp_est
                                  : ctx.phis[c].value_on(e.word));
      tau_edge.push_back(ctx.tau.value_on(e.word));
      logfp_edge.push_back(e.logfp_est);
      row_of.push_back(static_cast<int>(i));
      col_target.push_back(e.target);
    }
  }
  row_begin[n] = tau_edge.size();

  auto softmax_rows = [&](const std::vector<double>& theta, std::vector<double>& qprob) {
    qprob.resize(theta.size());
    for (size_t i = 0; i < n; ++i) {
      double mx = -1e300;
      for (size_t e = row_begin[i]; e < row_begin[i + 1]; ++e) mx = std::max(mx, theta[e]);
      double sum = 0.0;
      for (size_t e = row_begin[i]; e < row_begin[i + 1]; ++e) {
        qprob[e] = std::exp(theta[e] - mx);
        sum += qprob[e];
      }
      for (size_t e = row_begin[i]; e < row_begin[i + 1]; ++e) qprob[e] /= sum;
    }
  };

  std::vector<double> qbuf, pbuf(n), pnbuf(n);
  auto evaluate = [&](const std::vector<double>& theta, double penalty, double dead) {
    softmax_rows(theta, qbuf);
    std::fill(pbuf.begin(), pbuf.end(), 1.0 / static_cast<double>(n));
    for (int it = 0; it < 4000; ++it) {
      std::fill(pnbuf.begin(), pnbuf.end(), 0.0);
      for (size_t e = 0; e < qbuf.size(); ++e) pnbuf[col_target[e]] += pbuf[row_of[e]] * qbuf[e];
      double res = 0.0, sum = 0.0;
      for (size_t i = 0; i < n; ++i) {
        res = std::max(res, std::abs(pnbuf[i] - pbuf[i]));
        pnbuf[i] = 0.5 * (pnbuf[i] + pbuf[i]);
        sum += pnbuf[i];
      }
      for (double& v : pnbuf) v /= sum;
      pbuf.swap(pnbuf);
      if (res < 1e-13) break;
    }
    double h = 0.0, chi = 0.0, tmean = 0.0;
    std::vector<double> ints(k, 0.0);
    for (size_t e = 0; e < qbuf.size(); ++e) {
      const double mass = pbuf[row_of[e]] * qbuf[e];
      if (qbuf[e] > 0) h -= mass * std::log(qbuf[e]);
      chi += mass * logfp_edge[e];
      tmean += mass * tau_edge[e];
      for (size_t c = 0; c < k; ++c) ints[c] += mass * phi_edge[c][e];
    }
    double pen = 0.0;
    for (size_t c = 0; c < k; ++c) {
      const double viol = std::max(0.0, std::abs(ints[c] / tmean - targets[c]) - dead);
      pen += viol * viol;
    }
    return h / chi - penalty * pen;
  };

  std::mt19937 rng(seed + 17);
  std::normal_distribution<double> gauss(0.0, 0.5);
  double best_val = -1e300;
  std::vector<double> best_theta;

  for (int s = 0; s < 5; ++s) {
    std::vector<double> theta(tau_edge.size(), 0.0);
    if (s > 0)
      for (double& v : theta) v = gauss(rng);
    double penalty = 64.0;
    double dead = 0.5 * eps;
    double step = 0.25;
    double val = evaluate(theta, penalty, dead);
    for (int it = 0; it < 500; ++it) {
      std::vector<double> grad(theta.size());
      const double hstep = 1e-5;
      for (size_t e = 0; e < theta.size(); ++e) {
        theta[e] += hstep;
        const double up = evaluate(theta, penalty, dead);
        theta[e] -= 2 * hstep;
        const double dn = evaluate(theta, penalty, dead);
        theta[e] += hstep;
        grad[e] = (up - dn) / (2 * hstep);
      }
      bool moved = false;
      for (int bt = 0; bt < 20; ++bt) {
        std::vector<double> tn(theta.size());
        for (size_t e = 0; e < theta.size(); ++e) tn[e] = theta[e] + step * grad[e];
        const double vn = evaluate(tn, penalty, dead);
        if (vn > val + 1e-15) {
          theta = tn;
          val = vn;
          step = std::min(step * 1.5, 8.0);
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if ((it + 1) % 40 == 0) {
        // Anneal: double the penalty and shrink the deadzone to zero so the
        // ascent settles on the exact constraint, not the edge of the ball.
        penalty *= 2.0;
        dead = it < 320 ? dead * 0.25 : 0.0;
        val = evaluate(theta, penalty, dead);
        step = std::max(step, 1e-3);
      }
      if (!moved && step < 1e-11) break;
    }
    val = evaluate(theta, 1e9, 0.0);  // rank starts by the hard-constrained value
    if (val > best_val) {
      best_val = val;
      best_theta = theta;
    }
  }

  std::vector<double> qprob;
  softmax_rows(best_theta, qprob);
  std::vector<std::vector<CertEdge>> edges(n);
  {
    size_t e = 0;
    for (size_t i = 0; i < n; ++i) {
      for (const SubsystemEdge& se : ctx.sys.edges[i]) {
        CertEdge ce;
        ce.target = se.target;
        ce.prob = qprob[e++];
        ce.logfp_lo = se.logfp.lo;
        ce.logfp_hi = se.logfp.hi;
        ce.logfp_est = se.logfp_est;
        edges[i].push_back(ce);
      }
    }
  }
  out.sys_cert = make_markov_cert(*ctx.sys.map, ctx.sys.subalphabet, ctx.sys.depth,
                                  ctx.sys.states, std::move(edges), ctx.phis);
  out.converged = true;
  return out;
}

// Observable value range over its table and tail (global, not subsystem).
std::pair<double, double> observable_range(const Observable& phi) {
  if (phi.kind == Observable::Kind::kLogDerivative)
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [w, v] : phi.table) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  switch (phi.tail) {
    case Observable::Tail::kConstant:
      lo = std::min(lo, phi.tail_constant);
      hi = std::max(hi, phi.tail_constant);
      break;
    case Observable::Tail::kDigitValue:
      lo = std::min(lo, 2.0);
      hi = std::numeric_limits<double>::infinity();
      break;
    case Observable::Tail::kNone:
      break;
  }
  return {lo, hi};
}

}  // namespace

// Feasibility ------------------------------------------------------------------

FeasibilityResult check_feasibility(const SpectrumQuery& query) {
  FeasibilityResult out;
  if (query.observables.size() != query.targets.size())
    throw InputError("observables/targets size mismatch");

  for (size_t i = 0; i < query.observables.size(); ++i) {
    const auto [lo, hi] = observable_range(query.observables[i]);
    if (query.targets[i] < lo - 1e-12 || query.targets[i] > hi + 1e-12) {
      out.provably_infeasible = true;
      out.note = "target for " + query.observables[i].name + " outside value range [" +
                 std::to_string(lo) + ", " + std::to_string(hi) + "]";
      return out;
    }
  }

  const auto& sched = query.schedule;
  const auto [alo, ahi] = sched.alphabets.front();
  const std::vector<Symbol> sub = stage_subalphabet(*query.map, alo, ahi);

  struct Orbit {
    CertPtr cert;
    std::vector<double> vals;
  };
  std::vector<Orbit> orbits;
  for (int len = 1; len <= 3; ++len) {
    for (const Word& w : enumerate_words(query.map->rule(), sub, len)) {
      if (orbits.size() > 300) break;
      if (!query.map->rule().allowed(w.back(), w.front())) continue;
      bool primitive = true;
      for (size_t d = 1; d < w.size(); ++d)
        if (w.size() % d == 0) {
          bool power = true;
          for (size_t j = d; j < w.size() && power; ++j) power = w[j] == w[j % d];
          if (power) primitive = false;
        }
      if (!primitive) continue;
      Orbit o;
      o.cert = make_periodic_cert(*query.map, w, query.observables);
      for (size_t i = 0; i < query.observables.size(); ++i)
        o.vals.push_back(query.observables[i].kind == Observable::Kind::kLogDerivative
                             ? o.cert->chi.est
                             : o.cert->integrals.at(query.observables[i].name).est);
      orbits.push_back(std::move(o));
    }
  }

  for (double eps : sched.eps) {
    for (const Orbit& o : orbits) {
      double r = 0.0;
      for (size_t i = 0; i < o.vals.size(); ++i)
        r = std::max(r, std::abs(o.vals[i] - query.targets[i]));
      if (r < eps) {
        out.witness_found = true;
        out.eps = eps;
        out.witness = o.cert;
        out.residual = r;
        out.how = "periodic";
        return out;
      }
    }
    if (query.targets.size() == 1) {
      for (size_t a = 0; a < orbits.size(); ++a) {
        for (size_t b = a + 1; b < orbits.size(); ++b) {
          const double va = orbits[a].vals[0], vb = orbits[b].vals[0];
          if ((va - query.targets[0]) * (vb - query.targets[0]) > 0) continue;
          if (std::abs(va - vb) < 1e-14) continue;
          const double w = (query.targets[0] - vb) / (va - vb);
          const auto m = mix({{w, orbits[a].cert}, {1 - w, orbits[b].cert}});
          out.witness_found = true;
          out.eps = eps;
          out.witness = m;
          out.residual = 0.0;
          out.how = "mixture";
          return out;
        }
      }
    }
    try {
      SolverContext ctx =
          build_context(query.map, query.observables, alo, ahi, sched.depths.front(), sched);
      const auto leg = legendre_solve(ctx, query.targets, query.seed);
      const auto cert = contextual_cert(ctx, leg.sys_cert, query.observables);
      const double r = cert_residual(ctx, cert, query.observables, query.targets);
      if (r < eps) {
        out.witness_found = true;
        out.eps = eps;
        out.witness = cert;
        out.residual = r;
        out.how = "equilibrium";
        return out;
      }
    } catch (const ParabolicSubsystemError&) {
      // periodic witnesses above remain the only route at this stage
    }
  }
  out.note = "no witness within the schedule (semi-decision: not a proof of emptiness)";
  return out;
}

// Birkhoff spectrum ---------------------------------------------------------------

SpectrumResult birkhoff_spectrum(const SpectrumQuery& query) {
  SpectrumResult res;
  if (query.observables.size() != query.targets.size())
    throw InputError("observables/targets size mismatch");

  for (size_t i = 0; i < query.observables.size(); ++i) {
    const auto [lo, hi] = observable_range(query.observables[i]);
    if (query.targets[i] < lo - 1e-12 || query.targets[i] > hi + 1e-12) {
      res.feasible = false;
      res.provenance = "infeasible: target outside the range of " + query.observables[i].name;
      return res;
    }
  }

  const auto& sched = query.schedule;
  const size_t stages = std::min({sched.eps.size(), sched.alphabets.size(), sched.depths.size()});
  bool any_witness = false;

  for (size_t st = 0; st < stages; ++st) {
    const double eps = sched.eps[st];
    SolverContext ctx;
    try {
      ctx = build_context(query.map, query.observables, sched.alphabets[st].first,
                          sched.alphabets[st].second, sched.depths[st], sched);
    } catch (const ParabolicSubsystemError& e) {
      res.provenance = e.what();
      res.converged = false;
      continue;
    }

    auto consider = [&](const CertPtr& sys_cert, const char* backend, bool converged) {
      const auto cert = contextual_cert(ctx, sys_cert, query.observables);
      const double r = cert_residual(ctx, cert, query.observables, query.targets);
      WitnessRecord rec;
      rec.cert = cert;
      rec.eps = eps;
      rec.dim_lo = cert->dim.lo;
      rec.dim_est = cert->dim.est;
      rec.residual = r;
      rec.backend = backend;
      rec.subsystem = ctx.label;
      res.witnesses.push_back(rec);
      if (r < eps) {
        any_witness = true;
        if (cert->dim.lo > res.lower_bound) {
          res.lower_bound = cert->dim.lo;
          res.bracket_width = cert->dim.width();
          res.best_witness = cert;
        }
        res.lower_bound_est = std::max(res.lower_bound_est, cert->dim.est);
      }
      res.converged = res.converged && converged;
    };

    if (query.backend == Backend::kLegendre || query.backend == Backend::kBoth) {
      const auto leg = legendre_solve(ctx, query.targets, query.seed);
      consider(leg.sys_cert, "legendre", leg.converged);
    }
    if (query.backend == Backend::kDirect || query.backend == Backend::kBoth) {
      const auto dir = direct_solve(ctx, query.targets, eps, query.seed);
      if (!dir.skipped) consider(dir.sys_cert, "direct", dir.converged);
    }
  }

  res.feasible = any_witness;

  bool all_bounded = true;
  for (const auto& phi : query.observables) all_bounded = all_bounded && phi.bounded;
  if (all_bounded && any_witness) {
    const auto bi = beta_infinity(*query.map);
    if (!bi.finite_alphabet) {
      // Bounded observables and a nonempty level set: the dimension formula
      // takes the max with beta_infinity.
      res.beta_floor_applied = true;
      res.beta_floor = bi.value;
      if (bi.value > res.lower_bound) {
        res.lower_bound = bi.value;
        res.lower_bound_est = std::max(res.lower_bound_est, bi.value);
      }
      res.provenance += std::string(res.provenance.empty() ? "" : "; ") +
                        "beta_infinity floor applied (bounded observables, feasible level set)";
    }
  }
  res.value = res.lower_bound;
  return res;
}

// Lyapunov spectrum ---------------------------------------------------------------

SpectrumResult lyapunov_spectrum(MarkovMapPtr map, double alpha, const Schedule& schedule,
                                 Backend backend, unsigned seed) {
  if (alpha < 0) {
    SpectrumResult res;
    res.feasible = false;
    res.provenance = "Lyapunov exponents of expanding Markov maps are nonnegative";
    return res;
  }

  if (alpha == 0.0 && !map->neutral().empty()) {
    // Mixture path: t xi + (1-t) delta_neutral has dim(xi) and chi = t chi(xi).
    if (map->name() != "renyi")
      throw ParabolicSubsystemError("the alpha = 0 mixture path is built in for renyi only");
    SpectrumResult res;
    const Word neutral_word{map->neutral().front().first};
    const auto delta = make_periodic_cert(*map, neutral_word);
    for (const auto& [alo, ahi] : schedule.alphabets) {
      (void)alo;
      const Symbol a_max = std::max<Symbol>(2, ahi);
      const auto scheme = renyi_jump_scheme(schedule.induced_k_cap, a_max);
      std::vector<Symbol> ids(scheme.patterns.size());
      for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<Symbol>(i);
      const auto sys = build_subsystem(scheme.induced, ids, 1);
      const auto root = bowen_root(sys);
      const auto eq = equilibrium(sys, PotentialSpec::geometric(root.est));
      const auto xi = project_measure(scheme, eq);
      const double t = std::min(1.0, 0.999e-3 / std::max(xi->chi.est, 1e-12));
      const auto nu = mix({{t, xi}, {1 - t, delta}});
      WitnessRecord rec;
      rec.cert = nu;
      rec.eps = nu->chi.est;  // achieved proximity to alpha = 0
      rec.dim_lo = nu->dim.lo;
      rec.dim_est = nu->dim.est;
      rec.residual = nu->chi.est;
      rec.backend = "mixture";
      rec.subsystem = "induced bowen-root, a<=" + std::to_string(a_max);
      res.witnesses.push_back(rec);
      if (nu->dim.lo > res.lower_bound) {
        res.lower_bound = nu->dim.lo;
        res.lower_bound_est = nu->dim.est;
        res.bracket_width = nu->dim.width();
        res.best_witness = nu;
      }
    }
    res.feasible = true;
    res.value = res.lower_bound;
    res.provenance = "alpha = 0 path: mixtures with the neutral Dirac";
    return res;
  }

  if (std::isinf(alpha)) {
    SpectrumResult res;
    if (map->alphabet().is_finite()) {
      res.feasible = false;
      res.provenance = "finite alphabet: Lyapunov exponents are bounded";
      return res;
    }
    res.feasible = true;
    res.converged = false;
    res.provenance =
        "alpha = infinity: witnesses are tail subsystems with growing chi; no finite "
        "certificate attains an infinite exponent";
    for (Symbol m = 8; m <= 512; m *= 4) {
      const auto sys = build_subsystem(map, {m, m + 1}, 2);
      const auto root = bowen_root(sys);
      const auto eq = equilibrium(sys, PotentialSpec::geometric(root.est));
      WitnessRecord rec;
      rec.cert = eq;
      rec.dim_lo = eq->dim.lo;
      rec.dim_est = eq->dim.est;
      rec.residual = std::numeric_limits<double>::infinity();
      rec.backend = "tail-subsystem";
      rec.subsystem = "A={" + std::to_string(m) + "," + std::to_string(m + 1) + "}";
      res.witnesses.push_back(rec);
      if (eq->dim.lo > res.lower_bound) {
        res.lower_bound = eq->dim.lo;
        res.best_witness = eq;
      }
    }
    res.value = res.lower_bound;
    return res;
  }

  SpectrumQuery q;
  q.map = map;
  q.observables = {Observable::log_derivative()};
  q.targets = {alpha};
  q.schedule = schedule;
  q.backend = backend;
  q.seed = seed;
  return birkhoff_spectrum(q);
}

// Besicovitch-Eggleston --------------------------------------------------------------

SpectrumResult besicovitch_eggleston(MarkovMapPtr map, const FrequencyVector& freq,
                                     const Schedule& schedule, Backend backend, unsigned seed) {
  freq.validate();
  SpectrumResult res;

  if (map->name() == "renyi" && freq.total() < 1.0 - 1e-12) {
    // Part of the orbit frequency escapes through arbitrarily high digits;
    // the dimension is exactly the beta_infinity floor 1/2.
    res.exact = true;
    res.value = 0.5;
    res.lower_bound = 0.5;
    res.lower_bound_est = 0.5;
    res.beta_floor_applied = true;
    res.beta_floor = 0.5;
    res.provenance =
        "renyi frequency vector with total mass < 1: remaining frequency escapes to "
        "infinity and the dimension equals beta_infinity = 1/2 exactly";
    return res;
  }

  std::vector<Symbol> symbols;
  if (map->alphabet().is_finite()) {
    symbols = map->alphabet().ids();
    std::sort(symbols.begin(), symbols.end());
  } else {
    Symbol s = 1;
    while (symbols.size() < freq.head.size()) symbols.push_back(s++);
  }
  if (freq.head.size() > symbols.size())
    throw InputError("frequency head longer than the partition");

  SpectrumQuery q;
  q.map = map;
  for (size_t i = 0; i < freq.head.size(); ++i)
    q.observables.push_back(Observable::indicator(symbols[i]));
  q.targets = freq.head;
  q.schedule = schedule;
  q.backend = backend;
  q.seed = seed;
  return birkhoff_spectrum(q);
}

// Bounded-digit dimension ---------------------------------------------------------

ParabolicRootResult bounded_digit_dimension(int n, ParabolicRootOptions opts) {
  if (n < 2) throw InputError("bounded-digit sets need n >= 2");
  std::vector<Symbol> sub;
  for (Symbol s = 1; s <= n - 1; ++s) sub.push_back(s);
  return parabolic_bowen_root(builtin_renyi(), sub, opts);
}

// Flat spectrum ---------------------------------------------------------------------

FlatSpectrumResult flat_spectrum_witnesses(double alpha, int j_max, unsigned seed) {
  (void)seed;
  if (alpha < 2.0) throw InputError("the BCF digit mean is at least 2");
  FlatSpectrumResult out;
  out.alpha = alpha;
  const auto renyi = builtin_renyi();
  const Observable b1 = Observable::digit_value();
  const auto delta1 = make_periodic_cert(*renyi, {1}, {b1});

  // mu_p = (1 - p^{-1/2}) xi_p + p^{-1/2} delta_p, with xi_p the projected
  // equilibrium at the Bowen root of a subsystem growing with p.
  auto build_mu = [&](Symbol p) {
    const Symbol a_max = std::min<Symbol>(4 + static_cast<Symbol>(std::sqrt(double(p))), 16);
    const int k_cap = std::min<int>(12 + static_cast<int>(p) / 2, 48);
    const auto scheme = renyi_jump_scheme(k_cap, a_max);
    std::vector<Symbol> ids(scheme.patterns.size());
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<Symbol>(i);
    const auto sys = build_subsystem(scheme.induced, ids, 1);
    const auto root = bowen_root(sys);
    const auto eq = equilibrium(sys, PotentialSpec::geometric(root.est));
    const auto xi = project_measure(scheme, eq, {b1});
    const auto dp = make_periodic_cert(*renyi, {p}, {b1});
    const double s = 1.0 / std::sqrt(static_cast<double>(p));
    return mix({{1.0 - s, xi}, {s, dp}});
  };

  if (std::isinf(alpha)) {
    for (int j = 1; j <= j_max; ++j) {
      const Symbol p = static_cast<Symbol>(4 * (j + 1) * (j + 1));
      const auto mu = build_mu(p);
      const double ip = 1.0 / static_cast<double>(p);
      const auto nu = mix({{1.0 - ip, mu}, {ip, delta1}});
      FlatWitness w;
      w.j = j;
      w.p = p;
      w.t = 1.0 - ip;
      w.nu = nu;
      w.mu = mu;
      w.b1_integral = nu->integrals.at("b1").est;
      w.b1_target = std::numeric_limits<double>::infinity();
      w.dim_nu = nu->dim.est;
      w.dim_mu = mu->dim.est;
      out.witnesses.push_back(w);
    }
    return out;
  }

  Symbol p_probe = 4;
  for (int j = 1; j <= j_max; ++j) {
    const double target = alpha + 1.0 / j;
    CertPtr mu;
    Symbol p = p_probe;
    while (true) {
      mu = build_mu(p);
      if (mu->integrals.at("b1").est > alpha + j + 0.5) break;
      p *= 2;
      if (p > (1 << 24)) throw InputError("flat-spectrum probe overflow");
    }
    const double big = mu->integrals.at("b1").est;
    // t_j solves t*I + (1-t)*2 = alpha + 1/j, using int b1 d delta_1 = 2.
    const double t = (target - 2.0) / (big - 2.0);
    const auto nu = mix({{t, mu}, {1 - t, delta1}});
    FlatWitness w;
    w.j = j;
    w.p = p;
    w.t = t;
    w.nu = nu;
    w.mu = mu;
    w.b1_integral = nu->integrals.at("b1").est;
    w.b1_target = target;
    w.dim_nu = nu->dim.est;
    w.dim_mu = mu->dim.est;
    out.witnesses.push_back(w);
    p_probe = p;
  }
  return out;
}

// Sampling -------------------------------------------------------------------------

SampleStats sample_birkhoff(MarkovMapPtr map, const std::vector<Observable>& observables,
                            std::int64_t n, int seeds, unsigned rng_seed) {
  if (n < 1 || seeds < 1) throw InputError("sample_birkhoff needs n, seeds >= 1");
  for (const auto& phi : observables)
    if (phi.kind != Observable::Kind::kLogDerivative && phi.depth != 1)
      throw InputError("sampling supports depth-1 observables and log|f'|");

  SampleStats stats;
  const size_t k = observables.size();
  stats.series.assign(k, std::vector<SampleSeries>(seeds));

  parallel_for(static_cast<size_t>(seeds), [&](size_t lo, size_t hi) {
    for (size_t seed_idx = lo; seed_idx < hi; ++seed_idx) {
      std::mt19937_64 rng(rng_seed + 0x9e3779b97f4a7c15ull * (seed_idx + 1));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      double x = unif(rng);
      std::vector<double> sum(k, 0.0), comp(k, 0.0);
      std::vector<SampleSeries> local(k);
      for (size_t c = 0; c < k; ++c) {
        local[c].running_min_mean = std::numeric_limits<double>::infinity();
        local[c].running_max_mean = -std::numeric_limits<double>::infinity();
      }
      for (std::int64_t j = 0; j < n; ++j) {
        const auto sym = map->locate(x);
        if (!sym) break;  // orbit left the partition (measure-zero event)
        const Branch& br = map->branch(*sym);
        for (size_t c = 0; c < k; ++c) {
          double v;
          if (observables[c].kind == Observable::Kind::kLogDerivative)
            v = std::log(std::abs(br.dforward(x)));
          else
            v = observables[c].value_on({*sym});
          const double y = v - comp[c];
          const double t = sum[c] + y;
          comp[c] = (t - sum[c]) - y;
          sum[c] = t;
          const double mean = sum[c] / static_cast<double>(j + 1);
          local[c].final_mean = mean;
          local[c].running_min_mean = std::min(local[c].running_min_mean, mean);
          local[c].running_max_mean = std::max(local[c].running_max_mean, mean);
        }
        x = br.forward(x);
        // One-ulp dither: maps with power-of-two slopes iterate exactly in
        // binary and would collapse onto dyadic orbits without it.
        x += (static_cast<double>(rng() & 0xff) - 127.5) * 0x1p-60;
        if (!(x >= 0.0) || !(x < 1.0)) {
          if (map->ambient() == Ambient::kInterval) x = std::min(std::max(x, 0.0), 1.0 - 1e-16);
        }
      }
      for (size_t c = 0; c < k; ++c) stats.series[c][seed_idx] = local[c];
    }
  });

  stats.median_final.resize(k);
  stats.q1_final.resize(k);
  stats.q3_final.resize(k);
  for (size_t c = 0; c < k; ++c) {
    std::vector<double> finals;
    for (const auto& s : stats.series[c]) finals.push_back(s.final_mean);
    std::sort(finals.begin(), finals.end());
    const auto at = [&](double q) {
      return finals[std::min(finals.size() - 1,
                             static_cast<size_t>(q * (finals.size() - 1) + 0.5))];
    };
    stats.median_final[c] = at(0.5);
    stats.q1_final[c] = at(0.25);
    stats.q3_final[c] = at(0.75);
  }
  return stats;
}

}  // namespace thermospec

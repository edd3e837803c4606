#include "thermospec/measures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace thermospec {

namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// Averaged (lazy) power iteration for the stationary vector; converges for
// every irreducible kernel, periodic or not.
std::vector<double> stationary_vector(const std::vector<std::vector<CertEdge>>& edges) {
  const size_t n = edges.size();
  std::vector<double> p(n, 1.0 / static_cast<double>(n)), q(n);
  for (int it = 0; it < 200000; ++it) {
    std::fill(q.begin(), q.end(), 0.0);
    for (size_t i = 0; i < n; ++i)
      for (const CertEdge& e : edges[i]) q[e.target] += p[i] * e.prob;
    double res = 0.0, sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      res = std::max(res, std::abs(q[i] - p[i]));
      q[i] = 0.5 * (q[i] + p[i]);
      sum += q[i];
    }
    for (double& v : q) v /= sum;
    p.swap(q);
    if (res < 1e-13) break;
  }
  return p;
}

void cache_scalar_data(const MarkovMap& map, Certificate& c,
                       const std::vector<Observable>& observables);

bool word_is_primitive(const Word& w) {
  const size_t n = w.size();
  for (size_t d = 1; d < n; ++d) {
    if (n % d != 0) continue;
    bool power = true;
    for (size_t j = d; j < n && power; ++j) power = (w[j] == w[j % d]);
    if (power) return false;
  }
  return true;
}

void compute_dimension(Certificate& c) {
  c.dim_indeterminate = false;
  if (c.chi.hi <= 1e-15) {
    c.dim = {0.0, 0.0, 0.0};  // convention: dim = 0 when chi = 0
    return;
  }
  if (c.chi.lo <= 0.0) {
    if (c.h > 0.0) {
      c.dim_indeterminate = true;
      c.dim = {0.0, 1.0, c.chi.est > 0 ? std::min(1.0, c.h / c.chi.est) : 0.0};
      return;
    }
    c.dim = {0.0, 0.0, 0.0};
    return;
  }
  // Ambient dimension bound: intersect with [0, 1].
  c.dim.lo = std::max(0.0, std::min(1.0, c.h / c.chi.hi));
  c.dim.hi = std::max(0.0, std::min(1.0, c.h / c.chi.lo));
  c.dim.est = std::max(0.0, std::min(1.0, c.chi.est > 0 ? c.h / c.chi.est : 0.0));
}

ValueBracket integrate_impl(const Certificate& c, const MarkovMap& map, const Observable& phi);

// Lift a depth-d kernel to depth d' > d (the same measure, finer states).
Certificate lift_depth(const Certificate& c, const MarkovMap& map, int new_depth);

void cache_scalar_data(const MarkovMap& map, Certificate& c,
                       const std::vector<Observable>& observables) {
  switch (c.type) {
    case Certificate::Type::kMarkov: {
      c.h = 0.0;
      ValueBracket chi{0.0, 0.0, 0.0};
      for (size_t i = 0; i < c.states.size(); ++i) {
        const double pi = c.stationary[i];
        for (const CertEdge& e : c.edges[i]) {
          c.h -= pi * xlogx(e.prob);
          const double mass = pi * e.prob;
          chi.lo += mass * e.logfp_lo;
          chi.hi += mass * e.logfp_hi;
          chi.est += mass * e.logfp_est;
        }
      }
      c.chi = chi;
      break;
    }
    case Certificate::Type::kPeriodic: {
      c.h = 0.0;
      double sum = 0.0;
      for (size_t j = 0; j < c.orbit.size(); ++j) {
        const Branch& b = map.branch(c.periodic_word[j]);
        sum += std::log(std::abs(b.dforward(c.orbit[j])));
      }
      const double chi = sum / static_cast<double>(c.orbit.size());
      const double pad = 1e-12 * std::max(1.0, std::abs(chi));
      c.chi = {chi - pad, chi + pad, chi};
      if (std::abs(chi) < 1e-12) c.chi = {0.0, std::max(0.0, chi + pad), std::max(0.0, chi)};
      break;
    }
    case Certificate::Type::kMixture: {
      c.h = 0.0;
      c.chi = {0.0, 0.0, 0.0};
      for (const auto& [w, comp] : c.components) {
        c.h += w * comp->h;
        c.chi.lo += w * comp->chi.lo;
        c.chi.hi += w * comp->chi.hi;
        c.chi.est += w * comp->chi.est;
      }
      break;
    }
    case Certificate::Type::kProjected:
      break;  // cached values are written directly by project_measure
  }
  compute_dimension(c);
  for (const Observable& phi : observables) c.integrals[phi.name] = integrate_impl(c, map, phi);
}

ValueBracket integrate_impl(const Certificate& c, const MarkovMap& map, const Observable& phi) {
  if (phi.kind == Observable::Kind::kLogDerivative) return c.chi;
  switch (c.type) {
    case Certificate::Type::kMarkov: {
      if (phi.depth > c.depth + 1) {
        const Certificate lifted = lift_depth(c, map, phi.depth - 1);
        return integrate_impl(lifted, map, phi);
      }
      ValueBracket v{0.0, 0.0, 0.0};
      for (size_t i = 0; i < c.states.size(); ++i) {
        for (const CertEdge& e : c.edges[i]) {
          Word w = c.states[i];
          w.push_back(c.states[e.target].back());
          const double val = phi.value_on(w);
          const double mass = c.stationary[i] * e.prob;
          v.lo += mass * val;
          v.hi += mass * val;
          v.est += mass * val;
        }
      }
      return v;
    }
    case Certificate::Type::kPeriodic: {
      double sum = 0.0;
      const size_t n = c.periodic_word.size();
      for (size_t j = 0; j < n; ++j) {
        Word window;
        for (int t = 0; t < phi.depth; ++t) window.push_back(c.periodic_word[(j + t) % n]);
        sum += phi.value_on(window);
      }
      const double val = sum / static_cast<double>(n);
      return {val, val, val};
    }
    case Certificate::Type::kMixture: {
      ValueBracket v{0.0, 0.0, 0.0};
      for (const auto& [w, comp] : c.components) {
        const ValueBracket cv = integrate_impl(*comp, map, phi);
        v.lo += w * cv.lo;
        v.hi += w * cv.hi;
        v.est += w * cv.est;
      }
      return v;
    }
    case Certificate::Type::kProjected:
      throw InputError("projected certificate has no stored integral for " + phi.name +
                       "; request it at projection time");
  }
  return {};
}

Certificate lift_depth(const Certificate& c, const MarkovMap& /*map*/, int new_depth) {
  if (new_depth <= c.depth) return c;
  // States of the lift: admissible words of length new_depth whose every
  // depth-d window is a state of c.  Transition probability depends on the
  // last depth-d window only.
  std::map<Word, int> base_index;
  for (size_t i = 0; i < c.states.size(); ++i) base_index[c.states[i]] = static_cast<int>(i);

  std::vector<Word> states;
  std::function<void(Word&)> extend = [&](Word& w) {
    if (static_cast<int>(w.size()) == new_depth) {
      states.push_back(w);
      return;
    }
    const Word tail(w.end() - c.depth, w.end());
    const int bi = base_index.at(tail);
    for (const CertEdge& e : c.edges[bi]) {
      w.push_back(c.states[e.target].back());
      const Word ntail(w.end() - c.depth, w.end());
      if (base_index.count(ntail)) extend(w);
      w.pop_back();
    }
  };
  for (const Word& s : c.states) {
    Word w = s;
    extend(w);
  }
  std::sort(states.begin(), states.end());
  states.erase(std::unique(states.begin(), states.end()), states.end());
  std::map<Word, int> index;
  for (size_t i = 0; i < states.size(); ++i) index[states[i]] = static_cast<int>(i);

  Certificate out;
  out.type = Certificate::Type::kMarkov;
  out.map_name = c.map_name;
  out.subalphabet = c.subalphabet;
  out.depth = new_depth;
  out.states = states;
  out.edges.resize(states.size());
  out.stationary.assign(states.size(), 0.0);

  for (size_t i = 0; i < states.size(); ++i) {
    const Word tail(states[i].end() - c.depth, states[i].end());
    const int bi = base_index.at(tail);
    for (const CertEdge& e : c.edges[bi]) {
      Word nw(states[i].begin() + 1, states[i].end());
      nw.push_back(c.states[e.target].back());
      auto it = index.find(nw);
      if (it == index.end()) continue;
      CertEdge ne;
      ne.target = it->second;
      ne.prob = e.prob;
      ne.logfp_lo = e.logfp_lo;
      ne.logfp_hi = e.logfp_hi;
      ne.logfp_est = e.logfp_est;
      out.edges[i].push_back(ne);
    }
  }
  // Stationary mass of a lifted state = p(head window) * path probability.
  for (size_t i = 0; i < states.size(); ++i) {
    const Word& w = states[i];
    Word head(w.begin(), w.begin() + c.depth);
    double mass = c.stationary[base_index.at(head)];
    for (int j = 0; j + c.depth < new_depth; ++j) {
      const Word from(w.begin() + j, w.begin() + j + c.depth);
      const Word to(w.begin() + j + 1, w.begin() + j + 1 + c.depth);
      const int fi = base_index.at(from);
      double step = 0.0;
      for (const CertEdge& e : c.edges[fi])
        if (c.states[e.target] == to) step = e.prob;
      mass *= step;
    }
    out.stationary[i] = mass;
  }
  out.h = c.h;
  out.chi = c.chi;
  out.dim = c.dim;
  return out;
}

}  // namespace

// Constructors ---------------------------------------------------------------

CertPtr make_markov_cert(const MarkovMap& map, const std::vector<Symbol>& subalphabet,
                         int depth, std::vector<Word> states,
                         std::vector<std::vector<CertEdge>> edges,
                         const std::vector<Observable>& observables) {
  auto c = std::make_shared<Certificate>();
  c->type = Certificate::Type::kMarkov;
  c->map_name = map.name();
  c->subalphabet = subalphabet;
  std::sort(c->subalphabet.begin(), c->subalphabet.end());
  c->depth = depth;
  c->states = std::move(states);
  c->edges = std::move(edges);

  for (size_t i = 0; i < c->edges.size(); ++i) {
    double row = 0.0;
    for (const CertEdge& e : c->edges[i]) {
      if (e.prob < -1e-15) throw InputError("negative kernel entry");
      row += e.prob;
    }
    if (std::abs(row - 1.0) > 1e-12)
      throw InputError("kernel row " + std::to_string(i) + " sums to " + std::to_string(row));
  }

  // Fill log|f'| data from (depth+1)-cylinders when not supplied.
  for (size_t i = 0; i < c->edges.size(); ++i) {
    for (CertEdge& e : c->edges[i]) {
      if (e.logfp_lo != 0.0 || e.logfp_hi != 0.0 || e.logfp_est != 0.0) continue;
      Word w = c->states[i];
      w.push_back(c->states[e.target].back());
      const CylinderEnclosure cyl = cylinder(map, w);
      const Branch& b = map.branch(w.front());
      const Interval range = b.abs_derivative_range(cyl.box.intersect(b.domain));
      e.logfp_lo = std::log(std::max(range.lo, 1e-300));
      e.logfp_hi = std::log(range.hi);
      e.logfp_est = std::log(std::abs(b.dforward(cyl.representative())));
    }
  }

  c->stationary = stationary_vector(c->edges);
  cache_scalar_data(map, *c, observables);
  return c;
}

CertPtr make_bernoulli_cert(const MarkovMap& map, const std::vector<Symbol>& subalphabet,
                            const std::vector<double>& probs,
                            const std::vector<Observable>& observables) {
  if (probs.size() != subalphabet.size()) throw InputError("probs/subalphabet size mismatch");
  std::vector<Symbol> sorted = subalphabet;
  std::sort(sorted.begin(), sorted.end());
  std::vector<Word> states;
  for (Symbol s : sorted) states.push_back({s});
  std::vector<std::vector<CertEdge>> edges(states.size());
  for (size_t i = 0; i < states.size(); ++i) {
    for (size_t j = 0; j < states.size(); ++j) {
      if (!map.rule().allowed(sorted[i], sorted[j]) && probs[j] > 0)
        throw InputError("bernoulli kernel hits an inadmissible transition");
      if (probs[j] == 0.0) continue;
      CertEdge e;
      e.target = static_cast<int>(j);
      e.prob = probs[j];
      edges[i].push_back(e);
    }
  }
  return make_markov_cert(map, sorted, 1, std::move(states), std::move(edges), observables);
}

CertPtr make_periodic_cert(const MarkovMap& map, const Word& w,
                           const std::vector<Observable>& observables) {
  if (w.empty()) throw InputError("periodic word must be nonempty");
  if (!is_admissible(w, map.rule()) || !map.rule().allowed(w.back(), w.front()))
    throw InputError("word does not close an admissible cycle");
  if (!word_is_primitive(w)) throw InputError("periodic word must be primitive");

  auto c = std::make_shared<Certificate>();
  c->type = Certificate::Type::kPeriodic;
  c->map_name = map.name();
  c->periodic_word = w;
  const size_t n = w.size();
  c->orbit.resize(n);

  for (size_t j = 0; j < n; ++j) {
    // Fixed point of the composition of inverse branches along the rotated
    // word; inverse branches contract, so iteration converges.
    bool done = false;
    MobiusZ prod = MobiusZ::identity();
    bool exact = true;
    for (size_t t = 0; t < n && exact; ++t) {
      const Branch& b = map.branch(w[(j + t) % n]);
      if (!b.inverse_mobius) {
        exact = false;
        break;
      }
      prod = prod.compose(*b.inverse_mobius);
      exact = prod.ok;
    }
    if (exact) {
      const Branch& bj = map.branch(w[j]);
      if (auto fp = mobius_fixed_point(prod, bj.domain)) {
        c->orbit[j] = *fp;
        done = true;
      }
    }
    if (!done) {
      const Branch& bj = map.branch(w[j]);
      double y = bj.domain.mid();
      for (int it = 0; it < 400; ++it) {
        double z = y;
        for (size_t t = n; t-- > 0;) z = map.branch(w[(j + t) % n]).inverse(z);
        if (std::abs(z - y) < 1e-16) {
          y = z;
          break;
        }
        y = z;
      }
      c->orbit[j] = y;
    }
  }

  // Orbit closes: f^{n}(x_0) returns to x_0.
  double x = c->orbit[0];
  for (size_t j = 0; j < n; ++j) x = map.branch(w[j]).forward(x);
  if (std::abs(x - c->orbit[0]) > 1e-9)
    throw InputError("periodic orbit failed to close within 1e-9");

  cache_scalar_data(map, *c, observables);
  return c;
}

CertPtr mix(const std::vector<std::pair<double, CertPtr>>& components) {
  if (components.empty()) throw InputError("mixture needs at least one component");
  double total = 0.0;
  for (const auto& [w, comp] : components) {
    if (w < -1e-15) throw InputError("mixture weights must be nonnegative");
    if (!comp) throw InputError("null component");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InputError("mixture weights must sum to 1");

  // Components must be distinguishable certificates (distinct ergodic pieces)
  // for affine entropy to be valid; exact duplicates are merged instead.
  std::vector<std::pair<double, CertPtr>> merged;
  for (const auto& [w, comp] : components) {
    if (w == 0.0) continue;
    bool found = false;
    for (auto& [mw, mc] : merged) {
      if (mc->to_json() == comp->to_json()) {
        mw += w;
        found = true;
        break;
      }
    }
    if (!found) merged.emplace_back(w, comp);
  }
  if (merged.size() == 1) {
    // Mixture of one component is the component itself.
    return merged[0].second;
  }

  auto c = std::make_shared<Certificate>();
  c->type = Certificate::Type::kMixture;
  c->map_name = merged[0].second->map_name;
  for (const auto& [w, comp] : merged) {
    if (comp->map_name != c->map_name)
      throw InputError("mixture components live on different maps");
  }
  c->components = merged;
  c->h = 0.0;
  c->chi = {0.0, 0.0, 0.0};
  std::map<std::string, ValueBracket> acc;
  for (const auto& [w, comp] : c->components) {
    c->h += w * comp->h;
    c->chi.lo += w * comp->chi.lo;
    c->chi.hi += w * comp->chi.hi;
    c->chi.est += w * comp->chi.est;
    for (const auto& [name, v] : comp->integrals) {
      auto& a = acc[name];
      a.lo += w * v.lo;
      a.hi += w * v.hi;
      a.est += w * v.est;
    }
  }
  c->integrals = std::move(acc);
  compute_dimension(*c);
  return c;
}

// Operations -----------------------------------------------------------------

double entropy(const Certificate& c) { return c.h; }
ValueBracket lyapunov(const Certificate& c) { return c.chi; }

ValueBracket integrate(const Certificate& c, const MarkovMap& map, const Observable& phi) {
  auto it = c.integrals.find(phi.name);
  if (it != c.integrals.end()) return it->second;
  return integrate_impl(c, map, phi);
}

DimensionValue dimension(const Certificate& c) {
  return {c.dim, c.dim_indeterminate};
}

ValueBracket free_energy(const Certificate& c, double beta) {
  ValueBracket v;
  if (beta >= 0) {
    v.lo = c.h - beta * c.chi.hi;
    v.hi = c.h - beta * c.chi.lo;
  } else {
    v.lo = c.h - beta * c.chi.lo;
    v.hi = c.h - beta * c.chi.hi;
  }
  v.est = c.h - beta * c.chi.est;
  return v;
}

double stationarity_residual(const Certificate& c) {
  if (c.type != Certificate::Type::kMarkov) return 0.0;
  std::vector<double> q(c.stationary.size(), 0.0);
  for (size_t i = 0; i < c.edges.size(); ++i)
    for (const CertEdge& e : c.edges[i]) q[e.target] += c.stationary[i] * e.prob;
  double res = 0.0;
  for (size_t i = 0; i < q.size(); ++i) res = std::max(res, std::abs(q[i] - c.stationary[i]));
  return res;
}

// Serialization ---------------------------------------------------------------

namespace {

nlohmann::json bracket_json(const ValueBracket& v) {
  return nlohmann::json::array({v.lo, v.hi, v.est});
}
ValueBracket bracket_from(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

nlohmann::json cert_json(const Certificate& c) {
  nlohmann::json j;
  switch (c.type) {
    case Certificate::Type::kMarkov: j["type"] = "markov"; break;
    case Certificate::Type::kPeriodic: j["type"] = "periodic"; break;
    case Certificate::Type::kMixture: j["type"] = "mixture"; break;
    case Certificate::Type::kProjected: j["type"] = "projected"; break;
  }
  j["map"] = c.map_name;
  j["h"] = c.h;
  j["chi"] = bracket_json(c.chi);
  j["dim"] = bracket_json(c.dim);
  j["integrals"] = nlohmann::json::object();
  for (const auto& [name, v] : c.integrals) j["integrals"][name] = bracket_json(v);

  if (c.type == Certificate::Type::kMarkov) {
    j["subalphabet"] = c.subalphabet;
    j["depth"] = c.depth;
    j["states"] = nlohmann::json::array();
    for (const Word& w : c.states) j["states"].push_back(w);
    // Row-major dense kernel plus the per-edge log|f'| data.
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : c.edges) {
      nlohmann::json r = nlohmann::json::array();
      for (const CertEdge& e : row)
        r.push_back(nlohmann::json::array(
            {e.target, e.prob, e.logfp_lo, e.logfp_hi, e.logfp_est}));
      rows.push_back(r);
    }
    j["Q"] = rows;
    j["p"] = c.stationary;
  } else if (c.type == Certificate::Type::kPeriodic) {
    j["word"] = c.periodic_word;
    j["orbit"] = c.orbit;
  } else {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& [w, comp] : c.components)
      comps.push_back(nlohmann::json::array({w, cert_json(*comp)}));
    j["components"] = comps;
    if (c.type == Certificate::Type::kProjected) j["tau_mean"] = c.tau_mean;
  }
  return j;
}

CertPtr cert_from_json(const nlohmann::json& j) {
  auto c = std::make_shared<Certificate>();
  const std::string t = j.at("type").get<std::string>();
  c->map_name = j.at("map").get<std::string>();
  c->h = j.at("h").get<double>();
  c->chi = bracket_from(j.at("chi"));
  c->dim = bracket_from(j.at("dim"));
  for (auto it = j.at("integrals").begin(); it != j.at("integrals").end(); ++it)
    c->integrals[it.key()] = bracket_from(it.value());
  if (t == "markov") {
    c->type = Certificate::Type::kMarkov;
    c->subalphabet = j.at("subalphabet").get<std::vector<Symbol>>();
    c->depth = j.at("depth").get<int>();
    for (const auto& w : j.at("states")) c->states.push_back(w.get<Word>());
    for (const auto& row : j.at("Q")) {
      std::vector<CertEdge> r;
      for (const auto& e : row) {
        CertEdge edge;
        edge.target = e.at(0).get<int>();
        edge.prob = e.at(1).get<double>();
        edge.logfp_lo = e.at(2).get<double>();
        edge.logfp_hi = e.at(3).get<double>();
        edge.logfp_est = e.at(4).get<double>();
        r.push_back(edge);
      }
      c->edges.push_back(std::move(r));
    }
    c->stationary = j.at("p").get<std::vector<double>>();
  } else if (t == "periodic") {
    c->type = Certificate::Type::kPeriodic;
    c->periodic_word = j.at("word").get<Word>();
    c->orbit = j.at("orbit").get<std::vector<double>>();
  } else {
    c->type = t == "projected" ? Certificate::Type::kProjected : Certificate::Type::kMixture;
    for (const auto& comp : j.at("components"))
      c->components.emplace_back(comp.at(0).get<double>(), cert_from_json(comp.at(1)));
    if (c->type == Certificate::Type::kProjected) c->tau_mean = j.at("tau_mean").get<double>();
  }
  return c;
}

}  // namespace

std::string Certificate::to_json() const { return cert_json(*this).dump(); }

CertPtr Certificate::from_json(const std::string& text) {
  return cert_from_json(nlohmann::json::parse(text));
}

std::string Certificate::id() const {
  // FNV-1a over the canonical JSON; used as the content address in stores.
  const std::string s = to_json();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace thermospec

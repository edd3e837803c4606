#include "thermospec/maps.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace thermospec {

Interval Branch::abs_derivative_range(const Interval& sub, int grid) const {
  if (abs_derivative_range_fn) return abs_derivative_range_fn(sub);
  if (abs_dforward_monotone) {
    const double a = std::abs(dforward(sub.lo));
    const double b = std::abs(dforward(sub.hi));
    return widen(Interval::hull(a, b));
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int i = 0; i <= grid; ++i) {
    const double x = sub.lo + (sub.hi - sub.lo) * i / grid;
    const double v = std::abs(dforward(x));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // Grid sampling is not rigorous for wild derivatives; widen a little and
  // let consumers report the bracket width.
  return {down(lo * (1 - 1e-9)), up(hi * (1 + 1e-9))};
}

// Observable -----------------------------------------------------------------

Observable Observable::log_derivative() {
  Observable o;
  o.kind = Kind::kLogDerivative;
  o.depth = 1;
  o.bounded = false;
  o.name = "log|f'|";
  return o;
}

Observable Observable::indicator(Symbol a, std::string name) {
  Observable o;
  o.depth = 1;
  o.table[{a}] = 1.0;
  o.tail = Tail::kConstant;
  o.tail_constant = 0.0;
  o.bounded = true;
  o.name = name.empty() ? ("ind:" + std::to_string(a)) : std::move(name);
  return o;
}

Observable Observable::digit_value() {
  Observable o;
  o.depth = 1;
  o.tail = Tail::kDigitValue;
  o.bounded = false;
  o.name = "b1";
  return o;
}

Observable Observable::locally_constant(int depth, std::map<Word, double> table,
                                        double tail_constant, std::string name) {
  Observable o;
  o.depth = depth;
  o.table = std::move(table);
  o.tail = Tail::kConstant;
  o.tail_constant = tail_constant;
  o.bounded = true;
  o.name = std::move(name);
  return o;
}

double Observable::value_on(const Word& w) const {
  if (kind == Kind::kLogDerivative)
    throw InputError("log-derivative observable has no cylinder table value");
  if (static_cast<int>(w.size()) < depth)
    throw InputError("word shorter than observable depth");
  Word key(w.begin(), w.begin() + depth);
  auto it = table.find(key);
  if (it != table.end()) return it->second;
  switch (tail) {
    case Tail::kConstant:
      return tail_constant;
    case Tail::kDigitValue:
      return static_cast<double>(key[0] + 1);
    case Tail::kNone:
      throw InputError("observable " + name + " has no value on word " + word_to_string(key));
  }
  return 0.0;
}

// MarkovMap base --------------------------------------------------------------

bool MarkovMap::is_neutral_index(Symbol a) const {
  for (const auto& [s, x] : neutral_)
    if (s == a) return true;
  return false;
}

double MarkovMap::inf_abs_derivative(Symbol a) const {
  const Branch& br = branch(a);
  return br.abs_derivative_range(br.domain).lo;
}

double MarkovMap::sup_abs_derivative(Symbol a) const {
  const Branch& br = branch(a);
  return br.abs_derivative_range(br.domain).hi;
}

std::vector<std::string> MarkovMap::validate(const std::vector<Symbol>& probe) const {
  std::vector<std::string> warnings;
  for (size_t i = 0; i < probe.size(); ++i) {
    const Branch& bi = branch(probe[i]);
    for (size_t j = i + 1; j < probe.size(); ++j) {
      const Branch& bj = branch(probe[j]);
      const Interval inter = bi.domain.intersect(bj.domain);
      if (inter.lo < inter.hi - 1e-12)
        warnings.push_back("branch domains " + std::to_string(probe[i]) + "," +
                           std::to_string(probe[j]) + " overlap in interior");
    }
    // inverse o forward = id spot check
    const double x = bi.domain.mid();
    const double y = bi.forward(x);
    const double back = bi.inverse(y);
    if (std::abs(back - x) > 1e-12 * std::max(1.0, std::abs(x)))
      warnings.push_back("branch " + std::to_string(probe[i]) +
                         ": inverse(forward) deviates by " + std::to_string(back - x));
    const double sup = bi.abs_derivative_range(bi.domain).hi;
    if (!std::isfinite(sup) || sup > 1e12)
      warnings.push_back("branch " + std::to_string(probe[i]) +
                         ": derivative unbounded on domain (M1 warning)");
  }
  for (const auto& [a, xa] : neutral_) {
    const Branch& br = branch(a);
    if (!(br.domain.lo - 1e-12 <= xa && xa <= br.domain.hi + 1e-12))
      warnings.push_back("neutral point of index " + std::to_string(a) + " outside its domain");
    if (std::abs(std::abs(br.dforward(xa)) - 1.0) > 1e-9)
      warnings.push_back("declared neutral index " + std::to_string(a) +
                         " has |f'(x_a)| != 1");
  }
  return warnings;
}

// Built-in maps ---------------------------------------------------------------

namespace {

class CachedBranchMap : public MarkovMap {
 public:
  const Branch& branch(Symbol a) const override {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(a);
    if (it == cache_.end()) {
      if (!has_branch(a)) throw InputError(name_ + ": no branch " + std::to_string(a));
      it = cache_.emplace(a, std::make_unique<Branch>(make_branch(a))).first;
    }
    return *it->second;
  }

 protected:
  virtual Branch make_branch(Symbol a) const = 0;

 private:
  mutable std::mutex mu_;
  mutable std::unordered_map<Symbol, std::unique_ptr<Branch>> cache_;
};

class RenyiMap final : public CachedBranchMap {
 public:
  RenyiMap() {
    name_ = "renyi";
    alphabet_ = Alphabet::integers(1);
    rule_ = TransitionRule::full_shift();
    fully_branched_ = true;
    closed_form_cylinders_ = true;
    neutral_ = {{1, 0.0}};
  }

  bool has_branch(Symbol a) const override { return a >= 1; }

  std::optional<Symbol> locate(double x) const override {
    if (x < 0.0 || x >= 1.0) return std::nullopt;
    const double t = 1.0 / (1.0 - x);
    Symbol i = static_cast<Symbol>(std::floor(t));
    // Guard against rounding at the branch boundaries 1 - 1/i.
    if (x < 1.0 - 1.0 / static_cast<double>(i)) --i;
    if (x >= 1.0 - 1.0 / static_cast<double>(i + 1)) ++i;
    return i >= 1 ? std::optional<Symbol>(i) : std::nullopt;
  }

  std::optional<std::pair<Symbol, Rat>> step_exact(const Rat& x) const override {
    // x = p/q in [0,1): 1/(1-x) = q/(q-p); symbol = floor(q/(q-p)).
    const std::int64_t p = x.num, q = x.den;
    if (p < 0 || p >= q) return std::nullopt;
    const std::int64_t r = q - p;
    const std::int64_t i = q / r;
    Rat nx{q - i * r, r};
    nx.reduce();
    return std::make_pair(static_cast<Symbol>(i), nx);
  }

 protected:
  Branch make_branch(Symbol i) const override {
    Branch b;
    b.symbol = i;
    b.domain_lo_rat = Rat{i - 1, i};
    b.domain_hi_rat = Rat{i, i + 1};
    b.domain = {b.domain_lo_rat->to_double(), b.domain_hi_rat->to_double()};
    b.closed_left = true;
    b.closed_right = false;
    const double di = static_cast<double>(i);
    b.forward = [di](double x) { return 1.0 / (1.0 - x) - di; };
    b.dforward = [](double x) { const double t = 1.0 - x; return 1.0 / (t * t); };
    b.d2forward = [](double x) { const double t = 1.0 - x; return 2.0 / (t * t * t); };
    b.has_d2 = true;
    b.increasing = true;
    b.abs_dforward_monotone = true;
    b.inverse_mobius = MobiusZ{1, i - 1, 1, i};
    b.inverse = [di](double y) { return (y + di - 1.0) / (y + di); };
    b.inverse_enclosure = [m = *b.inverse_mobius](const Interval& y) { return m.apply(y); };
    return b;
  }
};

class GaussMap final : public CachedBranchMap {
 public:
  GaussMap() {
    name_ = "gauss";
    alphabet_ = Alphabet::integers(1);
    rule_ = TransitionRule::full_shift();
    fully_branched_ = true;
    closed_form_cylinders_ = true;
  }

  bool has_branch(Symbol a) const override { return a >= 1; }

  std::optional<Symbol> locate(double x) const override {
    if (x <= 0.0 || x > 1.0) return std::nullopt;
    const double t = 1.0 / x;
    Symbol i = static_cast<Symbol>(std::floor(t));
    if (static_cast<double>(i) == t && i >= 1) return i;  // x = 1/i, closed right end
    if (x > 1.0 / static_cast<double>(i)) --i;
    if (x <= 1.0 / static_cast<double>(i + 1)) ++i;
    return i >= 1 ? std::optional<Symbol>(i) : std::nullopt;
  }

  std::optional<std::pair<Symbol, Rat>> step_exact(const Rat& x) const override {
    const std::int64_t p = x.num, q = x.den;
    if (p <= 0 || p > q) return std::nullopt;  // 0 escapes the Gauss partition
    std::int64_t i = q / p;
    if (i * p == q) {
      // x = 1/i lies in the closed-right branch i.
      Rat nx{0, 1};
      return std::make_pair(static_cast<Symbol>(i), nx);
    }
    Rat nx{q - i * p, p};
    nx.reduce();
    return std::make_pair(static_cast<Symbol>(i), nx);
  }

 protected:
  Branch make_branch(Symbol i) const override {
    Branch b;
    b.symbol = i;
    b.domain_lo_rat = Rat{1, i + 1};
    b.domain_hi_rat = Rat{1, i};
    b.domain = {b.domain_lo_rat->to_double(), b.domain_hi_rat->to_double()};
    b.closed_left = false;
    b.closed_right = true;
    const double di = static_cast<double>(i);
    b.forward = [di](double x) { return 1.0 / x - di; };
    b.dforward = [](double x) { return -1.0 / (x * x); };
    b.d2forward = [](double x) { return 2.0 / (x * x * x); };
    b.has_d2 = true;
    b.increasing = false;
    b.abs_dforward_monotone = true;
    b.inverse_mobius = MobiusZ{0, 1, 1, i};
    b.inverse = [di](double y) { return 1.0 / (y + di); };
    b.inverse_enclosure = [m = *b.inverse_mobius](const Interval& y) { return m.apply(y); };
    return b;
  }
};

class FareyMap final : public CachedBranchMap {
 public:
  FareyMap() {
    name_ = "farey";
    alphabet_ = Alphabet::finite({1, 2});
    rule_ = TransitionRule::full_shift();
    fully_branched_ = true;
    closed_form_cylinders_ = true;
    neutral_ = {{1, 0.0}};
  }

  bool has_branch(Symbol a) const override { return a == 1 || a == 2; }

  std::optional<Symbol> locate(double x) const override {
    if (x < 0.0 || x > 1.0) return std::nullopt;
    return x < 0.5 ? 1 : 2;
  }

  std::optional<std::pair<Symbol, Rat>> step_exact(const Rat& x) const override {
    const std::int64_t p = x.num, q = x.den;
    if (p < 0 || p > q) return std::nullopt;
    if (2 * p < q) {
      Rat nx{p, q - p};
      nx.reduce();
      return std::make_pair(Symbol{1}, nx);
    }
    Rat nx{q - p, p};
    nx.reduce();
    return std::make_pair(Symbol{2}, nx);
  }

 protected:
  Branch make_branch(Symbol i) const override {
    Branch b;
    b.symbol = i;
    b.has_d2 = true;
    if (i == 1) {
      b.domain_lo_rat = Rat{0, 1};
      b.domain_hi_rat = Rat{1, 2};
      b.domain = {0.0, 0.5};
      b.closed_left = true;
      b.closed_right = false;
      b.forward = [](double x) { return x / (1.0 - x); };
      b.dforward = [](double x) { const double t = 1.0 - x; return 1.0 / (t * t); };
      b.d2forward = [](double x) { const double t = 1.0 - x; return 2.0 / (t * t * t); };
      b.increasing = true;
      b.inverse_mobius = MobiusZ{1, 0, 1, 1};
      b.inverse = [](double y) { return y / (1.0 + y); };
    } else {
      b.domain_lo_rat = Rat{1, 2};
      b.domain_hi_rat = Rat{1, 1};
      b.domain = {0.5, 1.0};
      b.closed_left = true;
      b.closed_right = true;
      b.forward = [](double x) { return (1.0 - x) / x; };
      b.dforward = [](double x) { return -1.0 / (x * x); };
      b.d2forward = [](double x) { return 2.0 / (x * x * x); };
      b.increasing = false;
      b.inverse_mobius = MobiusZ{0, 1, 1, 1};
      b.inverse = [](double y) { return 1.0 / (1.0 + y); };
    }
    b.abs_dforward_monotone = true;
    b.inverse_enclosure = [m = *b.inverse_mobius](const Interval& y) { return m.apply(y); };
    return b;
  }
};

class LinearMap final : public CachedBranchMap {
 public:
  explicit LinearMap(int base) : base_(base) {
    if (base < 2) throw InputError("linear map base must be >= 2");
    name_ = "linear:" + std::to_string(base);
    std::vector<Symbol> ids(base);
    for (int i = 0; i < base; ++i) ids[i] = i;
    alphabet_ = Alphabet::finite(ids);
    rule_ = TransitionRule::full_shift();
    fully_branched_ = true;
    closed_form_cylinders_ = true;
  }

  bool has_branch(Symbol a) const override { return a >= 0 && a < base_; }

  std::optional<Symbol> locate(double x) const override {
    if (x < 0.0 || x >= 1.0) return std::nullopt;
    Symbol i = static_cast<Symbol>(std::floor(x * base_));
    if (i >= base_) i = base_ - 1;
    return i;
  }

  std::optional<std::pair<Symbol, Rat>> step_exact(const Rat& x) const override {
    const std::int64_t p = x.num, q = x.den;
    if (p < 0 || p >= q) return std::nullopt;
    const __int128 bp = static_cast<__int128>(base_) * p;
    const std::int64_t i = static_cast<std::int64_t>(bp / q);
    Rat nx{static_cast<std::int64_t>(bp - static_cast<__int128>(i) * q), q};
    nx.reduce();
    return std::make_pair(static_cast<Symbol>(i), nx);
  }

 protected:
  Branch make_branch(Symbol i) const override {
    Branch b;
    b.symbol = i;
    b.domain_lo_rat = Rat{i, base_};
    b.domain_hi_rat = Rat{i + 1, base_};
    b.domain = {b.domain_lo_rat->to_double(), b.domain_hi_rat->to_double()};
    b.closed_left = true;
    b.closed_right = false;
    const double bb = base_;
    const double di = static_cast<double>(i);
    b.forward = [bb, di](double x) { return bb * x - di; };
    b.dforward = [bb](double) { return bb; };
    b.d2forward = [](double) { return 0.0; };
    b.has_d2 = true;
    b.increasing = true;
    b.abs_dforward_monotone = true;
    b.inverse_mobius = MobiusZ{1, i, 0, base_};
    b.inverse = [bb, di](double y) { return (y + di) / bb; };
    b.inverse_enclosure = [m = *b.inverse_mobius](const Interval& y) { return m.apply(y); };
    return b;
  }

 private:
  std::int64_t base_;
};

class FiniteMap final : public MarkovMap {
 public:
  FiniteMap(std::string name, Ambient ambient, std::vector<Branch> branches,
            TransitionRule rule, bool fully_branched,
            std::vector<std::pair<Symbol, double>> neutral) {
    name_ = std::move(name);
    ambient_ = ambient;
    rule_ = std::move(rule);
    fully_branched_ = fully_branched;
    neutral_ = std::move(neutral);
    std::vector<Symbol> ids;
    for (auto& b : branches) {
      ids.push_back(b.symbol);
      index_[b.symbol] = branches_.size();
      branches_.push_back(std::move(b));
    }
    alphabet_ = Alphabet::finite(ids);
  }

  const Branch& branch(Symbol a) const override {
    auto it = index_.find(a);
    if (it == index_.end()) throw InputError(name_ + ": no branch " + std::to_string(a));
    return branches_[it->second];
  }
  bool has_branch(Symbol a) const override { return index_.count(a) > 0; }

  std::optional<Symbol> locate(double x) const override {
    for (const Branch& b : branches_) {
      const bool lo_ok = b.closed_left ? x >= b.domain.lo : x > b.domain.lo;
      const bool hi_ok = b.closed_right ? x <= b.domain.hi : x < b.domain.hi;
      if (lo_ok && hi_ok) return b.symbol;
    }
    return std::nullopt;
  }

 private:
  std::vector<Branch> branches_;
  std::unordered_map<Symbol, size_t> index_;
};

}  // namespace

MarkovMapPtr builtin_renyi() {
  static MarkovMapPtr m = std::make_shared<RenyiMap>();
  return m;
}
MarkovMapPtr builtin_gauss() {
  static MarkovMapPtr m = std::make_shared<GaussMap>();
  return m;
}
MarkovMapPtr builtin_farey() {
  static MarkovMapPtr m = std::make_shared<FareyMap>();
  return m;
}
MarkovMapPtr builtin_linear(int b) { return std::make_shared<LinearMap>(b); }

MarkovMapPtr make_finite_map(std::string name, Ambient ambient, std::vector<Branch> branches,
                             TransitionRule rule, bool fully_branched,
                             std::vector<std::pair<Symbol, double>> neutral) {
  return std::make_shared<FiniteMap>(std::move(name), ambient, std::move(branches),
                                     std::move(rule), fully_branched, std::move(neutral));
}

MarkovMapPtr map_by_name(const std::string& spec) {
  if (spec == "renyi") return builtin_renyi();
  if (spec == "gauss") return builtin_gauss();
  if (spec == "farey") return builtin_farey();
  if (spec.rfind("linear:", 0) == 0) return builtin_linear(std::stoi(spec.substr(7)));
  if (spec.rfind("custom:", 0) == 0) {
    std::ifstream in(spec.substr(7));
    if (!in) throw InputError("cannot open custom map file " + spec.substr(7));
    std::stringstream ss;
    ss << in.rdbuf();
    return custom_map_from_json(ss.str());
  }
  throw InputError("unknown map spec: " + spec);
}

MarkovMapPtr custom_map_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  std::vector<Branch> branches;
  for (const auto& bj : j.at("branches")) {
    Branch b;
    b.symbol = bj.at("symbol").get<Symbol>();
    const auto dom = bj.at("domain");
    b.domain = {dom.at(0).get<double>(), dom.at(1).get<double>()};
    b.closed_left = bj.value("closed_left", true);
    b.closed_right = bj.value("closed_right", false);
    if (bj.contains("inverse_mobius")) {
      const auto m = bj.at("inverse_mobius");
      MobiusZ mz{m.at(0).get<std::int64_t>(), m.at(1).get<std::int64_t>(),
                 m.at(2).get<std::int64_t>(), m.at(3).get<std::int64_t>()};
      b.inverse_mobius = mz;
      b.inverse = [mz](double y) {
        return (static_cast<double>(mz.a) * y + static_cast<double>(mz.b)) /
               (static_cast<double>(mz.c) * y + static_cast<double>(mz.d));
      };
      b.inverse_enclosure = [mz](const Interval& y) { return mz.apply(y); };
      // Forward map and derivative from the inverse matrix.
      const double a = static_cast<double>(mz.a), bb = static_cast<double>(mz.b);
      const double c = static_cast<double>(mz.c), d = static_cast<double>(mz.d);
      const double det = a * d - bb * c;
      b.forward = [a, bb, c, d](double x) { return (d * x - bb) / (-c * x + a); };
      b.dforward = [a, c, det](double x) {
        const double t = -c * x + a;
        return det / (t * t);
      };
      b.d2forward = [a, c, det](double x) {
        const double t = -c * x + a;
        return 2.0 * det * c / (t * t * t);
      };
      b.has_d2 = true;
    } else if (bj.contains("inverse_poly")) {
      // Inverse branch as a polynomial in y; forward solved by bisection.
      const auto coeffs = bj.at("inverse_poly").get<std::vector<double>>();
      auto poly = [coeffs](double y) {
        double v = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * y + *it;
        return v;
      };
      auto dpoly = [coeffs](double y) {
        double v = 0.0;
        for (size_t k = coeffs.size(); k-- > 1;)
          v = v * y + coeffs[k] * static_cast<double>(k);
        return v;
      };
      b.inverse = poly;
      b.inverse_enclosure = [poly](const Interval& y) {
        return widen(Interval::hull(poly(y.lo), poly(y.hi)));
      };
      const Interval dom2 = b.domain;
      b.forward = [poly, dom2](double x) {
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 200; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (poly(mid) < x)
            lo = mid;
          else
            hi = mid;
        }
        return 0.5 * (lo + hi);
      };
      auto fwd = b.forward;
      b.dforward = [dpoly, fwd](double x) { return 1.0 / dpoly(fwd(x)); };
      b.has_d2 = false;
      b.abs_dforward_monotone = false;
    } else {
      throw InputError("custom branch needs inverse_mobius or inverse_poly");
    }
    b.increasing = bj.value("increasing", true);
    branches.push_back(std::move(b));
  }
  TransitionRule rule = TransitionRule::full_shift();
  bool fully = true;
  if (j.contains("transitions")) {
    std::vector<Symbol> ids;
    for (const auto& b : branches) ids.push_back(b.symbol);
    rule = TransitionRule::from_matrix(ids, j.at("transitions").get<std::vector<std::vector<int>>>());
    fully = false;
  }
  std::vector<std::pair<Symbol, double>> neutral;
  if (j.contains("neutral"))
    for (const auto& nj : j.at("neutral"))
      neutral.emplace_back(nj.at(0).get<Symbol>(), nj.at(1).get<double>());
  auto map = make_finite_map(j.value("name", std::string("custom")), Ambient::kInterval,
                             std::move(branches), std::move(rule), fully, std::move(neutral));
  // (M1) is a warning, not a hard failure, for custom maps.
  return map;
}

// cylinder -------------------------------------------------------------------

CylinderEnclosure cylinder(const MarkovMap& map, const Word& w) {
  if (w.empty()) throw InputError("cylinder of the empty word is the whole space");
  if (!is_admissible(w, map.rule())) throw InputError("inadmissible word " + word_to_string(w));
  for (Symbol s : w)
    if (!map.has_branch(s)) throw InputError("unknown symbol " + std::to_string(s));

  CylinderEnclosure out;
  out.word = w;

  const Branch& last = map.branch(w.back());

  // Exact path: integer Mobius product applied to rational endpoints.
  bool exact_ok = last.domain_lo_rat && last.domain_hi_rat;
  if (exact_ok) {
    MobiusZ prod = MobiusZ::identity();
    for (size_t j = 0; j + 1 < w.size() && exact_ok; ++j) {
      const Branch& br = map.branch(w[j]);
      if (!br.inverse_mobius) {
        exact_ok = false;
        break;
      }
      prod = prod.compose(*br.inverse_mobius);
      exact_ok = prod.ok;
    }
    if (exact_ok) {
      auto lo = prod.apply(*last.domain_lo_rat);
      auto hi = prod.apply(*last.domain_hi_rat);
      if (lo && hi) {
        if (*hi < *lo) std::swap(lo, hi);
        out.lo_rat = lo;
        out.hi_rat = hi;
        out.box = {down(lo->to_double()), up(hi->to_double())};
        return out;
      }
    }
  }

  // Rounded path: compose inverse enclosures right-to-left with widening.
  Interval box = last.domain;
  for (size_t j = w.size() - 1; j-- > 0;) {
    box = map.branch(w[j]).inverse_enclosure(box);
  }
  out.box = widen(box);
  return out;
}

// code -----------------------------------------------------------------------

CodeResult code(const MarkovMap& map, double x, int n) {
  CodeResult res;
  if (n <= 0) return res;

  // Exact rational iteration when the map supports it.
  if (auto r0 = Rat::from_double(x)) {
    Rat r = *r0;
    bool exact = true;
    for (int j = 0; j < n && exact; ++j) {
      auto step = map.step_exact(r);
      if (!step) {
        if (j == 0) {
          exact = false;  // map has no exact stepping at all; fall through
          break;
        }
        throw EscapeError(j, "orbit escapes the partition at time " + std::to_string(j));
      }
      res.trail.push_back(r.to_double());
      res.word.push_back(step->first);
      r = step->second;
    }
    if (exact && static_cast<int>(res.word.size()) == n) return res;
    res.word.clear();
    res.trail.clear();
  }

  double y = x;
  for (int j = 0; j < n; ++j) {
    const auto sym = map.locate(y);
    if (!sym) throw EscapeError(j, "orbit escapes the partition at time " + std::to_string(j));
    res.trail.push_back(y);
    res.word.push_back(*sym);
    y = map.branch(*sym).forward(y);
  }
  return res;
}

// BCF ------------------------------------------------------------------------

std::vector<std::int64_t> bcf_digits(double x, int n) {
  if (x < 0.0 || x >= 1.0) throw InputError("bcf_digits requires 0 <= x < 1");
  const auto c = code(*builtin_renyi(), x, n);
  std::vector<std::int64_t> digits;
  digits.reserve(c.word.size());
  for (Symbol s : c.word) digits.push_back(s + 1);
  return digits;
}

CylinderEnclosure bcf_eval(const std::vector<std::int64_t>& digits) {
  Word w;
  w.reserve(digits.size());
  for (std::int64_t d : digits) {
    if (d < 2) throw InputError("BCF digits must be >= 2");
    w.push_back(d - 1);
  }
  return cylinder(*builtin_renyi(), w);
}

// Renyi's condition ----------------------------------------------------------

std::optional<double> check_renyi_condition(const MarkovMap& map,
                                            const std::vector<Symbol>& subalphabet) {
  const std::string& n = map.name();
  // Closed-form overrides: |f''|/|f'|^2 = 2(1-x) for Renyi, 2x for Gauss,
  // 2(1-x) / 2x per branch for Farey, 0 for linear maps.
  if (n == "renyi" || n == "gauss" || n == "farey") return 2.0;
  if (n.rfind("linear:", 0) == 0) return 0.0;

  double k = 0.0;
  for (Symbol a : subalphabet) {
    const Branch& br = map.branch(a);
    if (!br.has_d2) return std::nullopt;
    const int grid = 64;
    for (int i = 0; i <= grid; ++i) {
      const double x = br.domain.lo + (br.domain.hi - br.domain.lo) * i / grid;
      const double fp = br.dforward(x);
      const double fpp = br.d2forward(x);
      k = std::max(k, std::abs(fpp) / (fp * fp));
    }
  }
  return k;
}

// (M3) -----------------------------------------------------------------------

M3Result check_m3(const MarkovMap& map, const std::vector<Symbol>& subalphabet,
                  bool /*monotone_tail_assertion*/) {
  M3Result res;
  double best = std::numeric_limits<double>::infinity();
  std::pair<Symbol, Symbol> best_pair{0, 0};
  std::vector<Symbol> sorted = subalphabet;
  std::sort(sorted.begin(), sorted.end());
  for (Symbol a1 : sorted) {
    for (Symbol a2 : map.rule().successors(a1, sorted)) {
      const bool qualifying = !map.is_neutral_index(a2) || a1 != a2;
      if (!qualifying) continue;
      const double v = map.inf_abs_derivative(a1) * map.inf_abs_derivative(a2);
      if (v < best) {
        best = v;
        best_pair = {a1, a2};
      }
    }
  }
  res.s = best;
  res.pair = best_pair;
  res.ok = best > 1.0;
  return res;
}

// decay profile ---------------------------------------------------------------

DecayProfile decay_profile(const MarkovMap& map, const std::vector<Symbol>& subalphabet,
                           int n_max, std::int64_t budget) {
  DecayProfile prof;
  prof.g.assign(n_max, 0.0);
  prof.argmax.assign(n_max, {});
  prof.exact.assign(n_max, Rat{0, 1});
  prof.all_exact = true;
  std::vector<Symbol> sorted = subalphabet;
  std::sort(sorted.begin(), sorted.end());

  std::int64_t nodes = 0;
  Word cur;

  auto visit = [&](auto&& self) -> void {
    if (++nodes > budget) {
      prof.complete = false;
      return;
    }
    const int k = static_cast<int>(cur.size());
    if (k > 0) {
      const CylinderEnclosure c = cylinder(map, cur);
      const double d = c.diameter();
      if (d > prof.g[k - 1]) {
        prof.g[k - 1] = d;
        prof.argmax[k - 1] = cur;
        if (c.exact()) {
          Rat diff{0, 1};
          // hi - lo exactly, when it fits
          const __int128 num = static_cast<__int128>(c.hi_rat->num) * c.lo_rat->den -
                               static_cast<__int128>(c.lo_rat->num) * c.hi_rat->den;
          const __int128 den = static_cast<__int128>(c.hi_rat->den) * c.lo_rat->den;
          constexpr __int128 lim = static_cast<__int128>(1) << 62;
          if (num < lim && den < lim) {
            diff = Rat{static_cast<std::int64_t>(num), static_cast<std::int64_t>(den)};
            diff.reduce();
            prof.exact[k - 1] = diff;
          } else {
            prof.all_exact = false;
          }
        } else {
          prof.all_exact = false;
        }
      }
      if (k == n_max) return;
      // Extensions only shrink; prune when this prefix cannot improve any
      // deeper level.
      double deeper_min = std::numeric_limits<double>::infinity();
      for (int m = k; m < n_max; ++m) deeper_min = std::min(deeper_min, prof.g[m]);
      if (d <= deeper_min) return;
    }
    const std::vector<Symbol> next =
        cur.empty() ? sorted : map.rule().successors(cur.back(), sorted);
    for (Symbol s : next) {
      cur.push_back(s);
      self(self);
      cur.pop_back();
      if (!prof.complete) return;
    }
  };
  visit(visit);
  return prof;
}

// distortion ------------------------------------------------------------------

DistortionBound distortion_dn(const MarkovMap& map, const Observable& phi,
                              const std::vector<Symbol>& subalphabet, int n) {
  DistortionBound out;
  if (phi.kind == Observable::Kind::kLocallyConstant) {
    // S_n(phi) on an n-cylinder varies only through the last depth-1 symbols;
    // enumerate extensions of length depth-1 and take the worst oscillation.
    const int r = phi.depth;
    double worst = 0.0;
    const auto words = enumerate_words(map.rule(), subalphabet, n);
    for (const Word& w : words) {
      const int ext = r - 1;
      double smin = std::numeric_limits<double>::infinity(), smax = -smin;
      std::vector<Word> exts;
      if (ext == 0) {
        exts.push_back({});
      } else {
        for (const Word& e : enumerate_words(map.rule(), subalphabet, ext)) {
          if (map.rule().allowed(w.back(), e.front())) exts.push_back(e);
        }
      }
      for (const Word& e : exts) {
        Word full = concat(w, e);
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
          Word sub(full.begin() + j, full.begin() + j + r);
          s += phi.value_on(sub);
        }
        smin = std::min(smin, s);
        smax = std::max(smax, s);
      }
      worst = std::max(worst, smax - smin);
    }
    out.dn = Interval(worst);
    out.exact = true;
    return out;
  }

  // log-derivative: D_n <= K * (sum_{j=1}^{n-1} g(j) + 1), with K from
  // Renyi's condition and g the decay profile.
  const auto k = check_renyi_condition(map, subalphabet);
  if (!k) {
    out.complete = false;
    out.dn = {0.0, std::numeric_limits<double>::infinity()};
    return out;
  }
  double sum = 1.0;
  if (n >= 2) {
    const DecayProfile prof = decay_profile(map, subalphabet, n - 1);
    out.complete = prof.complete;
    for (int j = 1; j <= n - 1; ++j) sum += prof.g[j - 1];
  }
  out.dn = {0.0, up(*k * sum)};
  return out;
}

}  // namespace thermospec

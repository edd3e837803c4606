#include "thermospec/symbolic.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace thermospec {

std::string word_to_string(const Word& w) {
  std::string s;
  for (size_t i = 0; i < w.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(w[i]);
  }
  return s;
}

Word word_from_string(const std::string& s) {
  Word w;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    w.push_back(std::stoll(tok));
  }
  return w;
}

Alphabet Alphabet::finite(std::vector<Symbol> ids) {
  if (ids.empty()) throw InputError("finite alphabet must be nonempty");
  std::vector<Symbol> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InputError("alphabet symbol ids must be unique");
  for (Symbol s : ids)
    if (s < 0) throw InputError("symbol ids must be >= 0");
  Alphabet a;
  a.finite_ = true;
  a.ids_ = std::move(ids);
  return a;
}

Alphabet Alphabet::integers(Symbol first) {
  Alphabet a;
  a.finite_ = false;
  a.first_ = first;
  return a;
}

bool Alphabet::contains(Symbol s) const {
  if (finite_) return std::find(ids_.begin(), ids_.end(), s) != ids_.end();
  return s >= first_;
}

const std::vector<Symbol>& Alphabet::ids() const {
  if (!finite_) throw InputError("infinite alphabet has no materialized id list");
  return ids_;
}

TransitionRule::TransitionRule(
    std::function<bool(Symbol, Symbol)> pred,
    std::function<std::vector<Symbol>(Symbol, const std::vector<Symbol>&)> succ)
    : pred_(std::move(pred)), succ_(std::move(succ)) {}

namespace {
std::vector<Symbol> filter_succ(const std::function<bool(Symbol, Symbol)>& pred, Symbol a,
                                const std::vector<Symbol>& sub) {
  std::vector<Symbol> out;
  for (Symbol b : sub)
    if (pred(a, b)) out.push_back(b);
  return out;
}
}  // namespace

TransitionRule TransitionRule::full_shift() {
  auto pred = [](Symbol, Symbol) { return true; };
  return TransitionRule(pred, [](Symbol, const std::vector<Symbol>& sub) { return sub; });
}

TransitionRule TransitionRule::from_matrix(const std::vector<Symbol>& ids,
                                           const std::vector<std::vector<int>>& t) {
  auto index = std::make_shared<std::map<Symbol, size_t>>();
  for (size_t i = 0; i < ids.size(); ++i) (*index)[ids[i]] = i;
  auto mat = std::make_shared<std::vector<std::vector<int>>>(t);
  auto pred = [index, mat](Symbol a, Symbol b) {
    auto ia = index->find(a), ib = index->find(b);
    if (ia == index->end() || ib == index->end()) return false;
    return (*mat)[ia->second][ib->second] != 0;
  };
  return TransitionRule(pred, [pred](Symbol a, const std::vector<Symbol>& sub) {
    return filter_succ(pred, a, sub);
  });
}

TransitionRule TransitionRule::forbid_pairs(std::function<Symbol(Symbol)> inverse) {
  auto inv = std::make_shared<std::function<Symbol(Symbol)>>(std::move(inverse));
  auto pred = [inv](Symbol a, Symbol b) { return (*inv)(a) != b; };
  return TransitionRule(pred, [pred](Symbol a, const std::vector<Symbol>& sub) {
    return filter_succ(pred, a, sub);
  });
}

bool is_admissible(const Word& w, const TransitionRule& rule) {
  for (size_t j = 0; j + 1 < w.size(); ++j)
    if (!rule.allowed(w[j], w[j + 1])) return false;
  return true;
}

bool is_admissible(const Word& w, const TransitionRule& rule, const Alphabet& alphabet) {
  for (Symbol s : w)
    if (!alphabet.contains(s)) throw InputError("unknown symbol id " + std::to_string(s));
  return is_admissible(w, rule);
}

std::vector<Word> enumerate_words(const TransitionRule& rule,
                                  const std::vector<Symbol>& subalphabet, int n,
                                  std::optional<Symbol> first, std::optional<Symbol> last) {
  if (subalphabet.empty()) throw InputError("empty subalphabet");
  if (n < 1) throw InputError("word length must be >= 1");
  std::vector<Symbol> sorted = subalphabet;
  std::sort(sorted.begin(), sorted.end());

  std::vector<Word> out;
  Word cur;
  auto dfs = [&](auto&& self) -> void {
    if (static_cast<int>(cur.size()) == n) {
      if (!last || cur.back() == *last) out.push_back(cur);
      return;
    }
    if (cur.empty()) {
      for (Symbol s : sorted) {
        if (first && s != *first) continue;
        cur.push_back(s);
        self(self);
        cur.pop_back();
      }
    } else {
      for (Symbol s : rule.successors(cur.back(), sorted)) {
        cur.push_back(s);
        self(self);
        cur.pop_back();
      }
    }
  };
  dfs(dfs);
  return out;
}

IrreducibilityResult check_finite_irreducibility(const TransitionRule& rule,
                                                 const std::vector<Symbol>& subalphabet,
                                                 int max_bridge_len) {
  if (subalphabet.empty()) throw InputError("empty subalphabet");
  if (max_bridge_len < 0) throw InputError("max_bridge_len must be >= 0");
  std::vector<Symbol> sorted = subalphabet;
  std::sort(sorted.begin(), sorted.end());

  // For every ordered pair (terminal symbol a, initial symbol b) we need a
  // bridge lambda with a·lambda·b admissible.  BFS over bridge words in
  // length-then-lex order finds the shortest one.
  std::set<Word> bridges;
  IrreducibilityCertificate cert;
  cert.subalphabet = sorted;

  for (Symbol a : sorted) {
    for (Symbol b : sorted) {
      // Does an already-collected bridge work?
      bool covered = false;
      for (const Word& l : bridges) {
        Word w;
        w.push_back(a);
        w.insert(w.end(), l.begin(), l.end());
        w.push_back(b);
        if (is_admissible(w, rule)) {
          covered = true;
          break;
        }
      }
      if (covered) continue;

      std::optional<Word> found;
      std::queue<Word> q;
      q.push({});
      while (!q.empty() && !found) {
        Word l = q.front();
        q.pop();
        Word w;
        w.push_back(a);
        w.insert(w.end(), l.begin(), l.end());
        w.push_back(b);
        if (is_admissible(w, rule)) {
          found = l;
          break;
        }
        if (static_cast<int>(l.size()) < max_bridge_len) {
          // Extend only along admissible prefixes a·l·s.
          Symbol tail = l.empty() ? a : l.back();
          for (Symbol s : rule.successors(tail, sorted)) {
            Word nl = l;
            nl.push_back(s);
            q.push(nl);
          }
        }
      }
      if (!found) {
        IrreducibilityResult r;
        r.failure = IrreducibilityFailure{a, b, max_bridge_len};
        return r;
      }
      bridges.insert(*found);
    }
  }

  cert.bridges.assign(bridges.begin(), bridges.end());
  for (const Word& l : cert.bridges)
    cert.max_bridge_len = std::max(cert.max_bridge_len, static_cast<int>(l.size()));
  IrreducibilityResult r;
  r.certificate = std::move(cert);
  return r;
}

bool IrreducibilityCertificate::revalidate(const TransitionRule& rule) const {
  for (Symbol a : subalphabet) {
    for (Symbol b : subalphabet) {
      bool ok = false;
      for (const Word& l : bridges) {
        Word w;
        w.push_back(a);
        w.insert(w.end(), l.begin(), l.end());
        w.push_back(b);
        if (is_admissible(w, rule)) {
          ok = true;
          break;
        }
      }
      if (!ok) return false;
    }
  }
  return true;
}

std::string IrreducibilityCertificate::to_json() const {
  nlohmann::json j;
  j["bridges"] = nlohmann::json::array();
  for (const Word& w : bridges) j["bridges"].push_back(w);
  j["max_len"] = max_bridge_len;
  j["subalphabet"] = subalphabet;
  return j.dump();
}

IrreducibilityCertificate IrreducibilityCertificate::from_json(const std::string& s) {
  nlohmann::json j = nlohmann::json::parse(s);
  IrreducibilityCertificate c;
  for (const auto& w : j.at("bridges")) c.bridges.push_back(w.get<Word>());
  c.max_bridge_len = j.at("max_len").get<int>();
  c.subalphabet = j.at("subalphabet").get<std::vector<Symbol>>();
  return c;
}

}  // namespace thermospec

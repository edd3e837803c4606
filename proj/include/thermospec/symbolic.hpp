#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace thermospec {

using Symbol = std::int64_t;

// A word is a finite (possibly empty) sequence of symbol ids.
using Word = std::vector<Symbol>;

std::string word_to_string(const Word& w);
Word word_from_string(const std::string& s);

inline Word concat(const Word& a, const Word& b) {
  Word r = a;
  r.insert(r.end(), b.begin(), b.end());
  return r;
}

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Symbol inventory.  Finite alphabets list their ids; integer-indexed
// infinite alphabets contain every id >= first.  Exhaustive operations always
// take an explicit finite subalphabet, so the infinite case is never
// materialized.
class Alphabet {
 public:
  static Alphabet finite(std::vector<Symbol> ids);
  static Alphabet integers(Symbol first = 1);

  bool contains(Symbol s) const;
  bool is_finite() const { return finite_; }
  const std::vector<Symbol>& ids() const;  // throws for infinite alphabets

 private:
  bool finite_ = true;
  Symbol first_ = 1;
  std::vector<Symbol> ids_;
};

// Pairwise transition predicate plus a successor enumerator.  The enumerator
// must agree with the predicate on every queried pair; the full-shift and
// matrix-backed constructors guarantee this by construction.
class TransitionRule {
 public:
  TransitionRule() = default;
  TransitionRule(std::function<bool(Symbol, Symbol)> pred,
                 std::function<std::vector<Symbol>(Symbol, const std::vector<Symbol>&)> succ);

  static TransitionRule full_shift();
  // Dense matrix over an explicit symbol list; row index = position in `ids`.
  static TransitionRule from_matrix(const std::vector<Symbol>& ids,
                                    const std::vector<std::vector<int>>& t);
  // Forbids transitions a -> inverse(a).
  static TransitionRule forbid_pairs(std::function<Symbol(Symbol)> inverse);

  bool allowed(Symbol a, Symbol b) const { return pred_(a, b); }
  // Successors of `a` within the given finite subalphabet, in its order.
  std::vector<Symbol> successors(Symbol a, const std::vector<Symbol>& subalphabet) const {
    return succ_(a, subalphabet);
  }

 private:
  std::function<bool(Symbol, Symbol)> pred_;
  std::function<std::vector<Symbol>(Symbol, const std::vector<Symbol>&)> succ_;
};

// A word of length n is admissible if every consecutive pair passes the rule;
// words of length 0 and 1 are admissible.
bool is_admissible(const Word& w, const TransitionRule& rule);
bool is_admissible(const Word& w, const TransitionRule& rule, const Alphabet& alphabet);

// All admissible words of length n over the subalphabet, lexicographic in the
// subalphabet's order, optionally with prescribed first/last symbols.
std::vector<Word> enumerate_words(const TransitionRule& rule,
                                  const std::vector<Symbol>& subalphabet, int n,
                                  std::optional<Symbol> first = std::nullopt,
                                  std::optional<Symbol> last = std::nullopt);

struct IrreducibilityCertificate {
  std::vector<Word> bridges;  // the bridge set, empty word permitted
  int max_bridge_len = 0;
  std::vector<Symbol> subalphabet;

  std::string to_json() const;
  static IrreducibilityCertificate from_json(const std::string& s);

  // Brute-force re-validation: every ordered boundary-symbol pair must admit
  // some bridge.
  bool revalidate(const TransitionRule& rule) const;
};

struct IrreducibilityFailure {
  Symbol from = 0, to = 0;  // the pair with no bridge within budget
  int budget = 0;
};

struct IrreducibilityResult {
  std::optional<IrreducibilityCertificate> certificate;
  std::optional<IrreducibilityFailure> failure;
  bool ok() const { return certificate.has_value(); }
};

// Greedy shortest bridges by breadth-first search, ties broken
// lexicographically.  Budget exhaustion is a report, not a disproof.
IrreducibilityResult check_finite_irreducibility(const TransitionRule& rule,
                                                 const std::vector<Symbol>& subalphabet,
                                                 int max_bridge_len);

}  // namespace thermospec

#include <random>

#include "doctest.h"
#include "thermospec/symbolic.hpp"

using namespace thermospec;

namespace {
// 4-symbol alphabet {1,2,3,4} with 2 = 1^{-1}, 4 = 3^{-1}.
Symbol pair_inverse(Symbol s) {
  switch (s) {
    case 1: return 2;
    case 2: return 1;
    case 3: return 4;
    default: return 3;
  }
}
}  // namespace

TEST_CASE("admissibility basics") {
  const auto full = TransitionRule::full_shift();
  CHECK(is_admissible({}, full));
  CHECK(is_admissible({3, 1, 7}, full));

  const auto reduced = TransitionRule::forbid_pairs(pair_inverse);
  CHECK_FALSE(is_admissible({1, 2}, reduced));
  CHECK(is_admissible({1, 1}, reduced));
  CHECK(is_admissible({1}, reduced));
  CHECK(is_admissible({}, reduced));

  const auto alpha = Alphabet::finite({1, 2, 3, 4});
  CHECK_THROWS_AS(is_admissible({1, 9}, reduced, alpha), InputError);
}

TEST_CASE("word utilities") {
  const Word a = {1, 2}, b = {3}, empty = {};
  CHECK(concat(a, empty) == a);
  CHECK(concat(empty, a) == a);
  CHECK(concat(concat(a, b), a) == concat(a, concat(b, a)));
  CHECK(word_from_string("1,2,3") == Word{1, 2, 3});
  CHECK(word_to_string({5, 7}) == "5,7");
}

TEST_CASE("enumerate_words") {
  const auto full = TransitionRule::full_shift();
  const auto words = enumerate_words(full, {1, 2}, 2);
  REQUIRE(words.size() == 4);
  CHECK(words[0] == Word{1, 1});
  CHECK(words[1] == Word{1, 2});
  CHECK(words[2] == Word{2, 1});
  CHECK(words[3] == Word{2, 2});

  // Full shift over m symbols has m^n words.
  for (int m = 2; m <= 4; ++m) {
    std::vector<Symbol> sub;
    for (Symbol s = 1; s <= m; ++s) sub.push_back(s);
    std::size_t expect = 1;
    for (int j = 0; j < 3; ++j) expect *= m;
    CHECK(enumerate_words(full, sub, 3).size() == expect);
  }

  // Inverse-pair-forbidden rule over 4 symbols: 16 - 4 = 12 length-2 words.
  const auto reduced = TransitionRule::forbid_pairs(pair_inverse);
  CHECK(enumerate_words(reduced, {1, 2, 3, 4}, 2).size() == 12);

  CHECK_THROWS_AS(enumerate_words(full, {}, 2), InputError);

  // Endpoint filters.
  const auto w13 = enumerate_words(full, {1, 2, 3}, 3, Symbol{1}, Symbol{3});
  for (const Word& w : w13) {
    CHECK(w.front() == 1);
    CHECK(w.back() == 3);
  }
  CHECK(w13.size() == 3);
}

TEST_CASE("enumerated words all pass is_admissible (exhaustive cross-check)") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const int m = 3 + static_cast<int>(rng() % 4);  // up to 6 symbols
    std::vector<Symbol> ids;
    for (Symbol s = 1; s <= m; ++s) ids.push_back(s);
    std::vector<std::vector<int>> t(m, std::vector<int>(m));
    for (auto& row : t) {
      bool any = false;
      for (auto& v : row) {
        v = rng() % 2;
        any = any || v;
      }
      if (!any) row[rng() % m] = 1;  // keep every state alive
    }
    const auto rule = TransitionRule::from_matrix(ids, t);
    for (int n = 1; n <= 5; ++n) {
      std::size_t count = 0;
      for (const Word& w : enumerate_words(rule, ids, n)) {
        CHECK(is_admissible(w, rule));
        ++count;
      }
      // Brute force over all m^n words.
      std::size_t brute = 0;
      std::vector<int> idx(n, 0);
      while (true) {
        Word w(n);
        for (int j = 0; j < n; ++j) w[j] = ids[idx[j]];
        if (is_admissible(w, rule)) ++brute;
        int j = n - 1;
        while (j >= 0 && ++idx[j] == m) idx[j--] = 0;
        if (j < 0) break;
      }
      CHECK(count == brute);
    }
  }
}

TEST_CASE("finite irreducibility certificates") {
  const auto full = TransitionRule::full_shift();
  const auto r1 = check_finite_irreducibility(full, {1, 2, 3}, 3);
  REQUIRE(r1.ok());
  REQUIRE(r1.certificate->bridges.size() == 1);
  CHECK(r1.certificate->bridges[0].empty());  // Lambda = {empty word}
  CHECK(r1.certificate->revalidate(full));

  // Transitive 2-state chain T = [[0,1],[1,1]].
  const auto chain = TransitionRule::from_matrix({1, 2}, {{0, 1}, {1, 1}});
  const auto r2 = check_finite_irreducibility(chain, {1, 2}, 3);
  REQUIRE(r2.ok());
  for (const Word& l : r2.certificate->bridges) {
    const bool empty_or_2 = l.empty() || l == Word{2};
    CHECK(empty_or_2);
  }
  CHECK(r2.certificate->revalidate(chain));

  // Two disconnected components: no bridge exists.
  const auto split = TransitionRule::from_matrix({1, 2}, {{1, 0}, {0, 1}});
  const auto r3 = check_finite_irreducibility(split, {1, 2}, 4);
  REQUIRE_FALSE(r3.ok());
  REQUIRE(r3.failure.has_value());
  const bool pair_named = (r3.failure->from == 1 && r3.failure->to == 2) ||
                          (r3.failure->from == 2 && r3.failure->to == 1);
  CHECK(pair_named);
}

TEST_CASE("certificate JSON round trip") {
  const auto chain = TransitionRule::from_matrix({1, 2}, {{0, 1}, {1, 1}});
  const auto r = check_finite_irreducibility(chain, {1, 2}, 3);
  REQUIRE(r.ok());
  const auto back = IrreducibilityCertificate::from_json(r.certificate->to_json());
  CHECK(back.bridges == r.certificate->bridges);
  CHECK(back.max_bridge_len == r.certificate->max_bridge_len);
  CHECK(back.subalphabet == r.certificate->subalphabet);
  CHECK(back.revalidate(chain));
}

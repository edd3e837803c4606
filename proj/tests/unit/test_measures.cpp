#include <cmath>
#include <random>

#include "doctest.h"
#include "thermospec/measures.hpp"

using namespace thermospec;

namespace {
// Independent oracle: -sum p log p for a Bernoulli row.
double bernoulli_entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0) h -= v * std::log(v);
  return h;
}
}  // namespace

TEST_CASE("entropy") {
  const auto two = builtin_linear(2);
  const auto uniform = make_bernoulli_cert(*two, {0, 1}, {0.5, 0.5});
  CHECK(entropy(*uniform) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const auto skew = make_bernoulli_cert(*two, {0, 1}, {0.25, 0.75});
  CHECK(entropy(*skew) == doctest::Approx(0.5623351446188083).epsilon(1e-12));
  CHECK(entropy(*skew) == doctest::Approx(bernoulli_entropy({0.25, 0.75})).epsilon(1e-14));

  const auto r = builtin_renyi();
  const auto dirac = make_periodic_cert(*r, {2});
  CHECK(entropy(*dirac) == 0.0);

  // Entropy <= log(out-degree), equality iff uniform rows.
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    double a = 0.05 + 0.9 * (rng() % 1000) / 1000.0;
    const auto c = make_bernoulli_cert(*two, {0, 1}, {a, 1 - a});
    CHECK(entropy(*c) <= std::log(2.0) + 1e-12);
    if (std::abs(a - 0.5) > 1e-3) CHECK(entropy(*c) < std::log(2.0));
  }
}

TEST_CASE("lyapunov") {
  const auto two = builtin_linear(2);
  const auto c = make_bernoulli_cert(*two, {0, 1}, {0.3, 0.7});
  const auto chi = lyapunov(*c);
  CHECK(chi.lo == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(chi.hi == doctest::Approx(std::log(2.0)).epsilon(1e-9));

  const auto r = builtin_renyi();
  // Fixed point of branch 2 (digit 3) at x = (sqrt(5)-1)/2.
  const auto d2 = make_periodic_cert(*r, {2});
  CHECK(d2->orbit[0] == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0).epsilon(1e-12));
  CHECK(lyapunov(*d2).est == doctest::Approx(1.9248473002384139).epsilon(1e-10));

  // Neutral fixed point: chi = 0, dim = 0 by convention.
  const auto d1 = make_periodic_cert(*r, {1});
  CHECK(lyapunov(*d1).est == doctest::Approx(0.0));
  CHECK(dimension(*d1).value.hi == 0.0);
}

TEST_CASE("integrate") {
  const auto r = builtin_renyi();
  const auto b1 = Observable::digit_value();

  const auto d1 = make_periodic_cert(*r, {1}, {b1});
  CHECK(integrate(*d1, *r, b1).est == doctest::Approx(2.0));

  for (Symbol p : {2, 3, 7, 20}) {
    const auto dp = make_periodic_cert(*r, {p}, {b1});
    CHECK(integrate(*dp, *r, b1).est == doctest::Approx(static_cast<double>(p + 1)));
  }

  const auto two = builtin_linear(2);
  const auto bern = make_bernoulli_cert(*two, {0, 1}, {0.3, 0.7});
  CHECK(integrate(*bern, *two, Observable::indicator(0)).est == doctest::Approx(0.3).epsilon(1e-10));

  // Depth-2 observable forces a kernel lift.
  std::map<Word, double> table;
  table[{0, 1}] = 1.0;
  const auto phi01 = Observable::locally_constant(2, table, 0.0, "pair01");
  CHECK(integrate(*bern, *two, phi01).est == doctest::Approx(0.3 * 0.7).epsilon(1e-10));
}

TEST_CASE("dimension") {
  const auto two = builtin_linear(2);
  const auto uni = make_bernoulli_cert(*two, {0, 1}, {0.5, 0.5});
  CHECK(dimension(*uni).value.est == doctest::Approx(1.0).epsilon(1e-10));

  const auto skew = make_bernoulli_cert(*two, {0, 1}, {0.25, 0.75});
  CHECK(dimension(*skew).value.est == doctest::Approx(0.8112781244591328).epsilon(1e-10));
  CHECK(dimension(*skew).value.lo <= dimension(*skew).value.est);
  CHECK(dimension(*skew).value.hi >= dimension(*skew).value.est);
  CHECK(dimension(*skew).value.lo >= 0.0);
  CHECK(dimension(*skew).value.hi <= 1.0);
}

TEST_CASE("mixtures") {
  const auto r = builtin_renyi();
  const auto b1 = Observable::digit_value();

  const auto mu = make_bernoulli_cert(*r, {2, 3}, {0.5, 0.5}, {b1});
  const auto delta1 = make_periodic_cert(*r, {1}, {b1});

  const double t = 0.35;
  const auto nu = mix({{t, mu}, {1 - t, delta1}});
  CHECK(entropy(*nu) == doctest::Approx(t * entropy(*mu)).epsilon(1e-12));
  CHECK(lyapunov(*nu).est == doctest::Approx(t * lyapunov(*mu).est).epsilon(1e-12));
  // delta_1 has h = chi = 0, so the ratio (hence dimension) is unchanged.
  CHECK(dimension(*nu).value.est ==
        doctest::Approx(dimension(*mu).value.est).epsilon(1e-12));
  CHECK(integrate(*nu, *r, b1).est ==
        doctest::Approx(t * integrate(*mu, *r, b1).est + (1 - t) * 2.0).epsilon(1e-12));

  // Single component: unchanged.
  const auto same = mix({{1.0, mu}});
  CHECK(entropy(*same) == entropy(*mu));

  // Two Bernoulli components on linear(2): affine h and constant chi.
  const auto two = builtin_linear(2);
  const auto a = make_bernoulli_cert(*two, {0, 1}, {0.25, 0.75});
  const auto b = make_bernoulli_cert(*two, {0, 1}, {0.75, 0.25});
  const auto m = mix({{0.5, a}, {0.5, b}});
  CHECK(entropy(*m) ==
        doctest::Approx(0.5 * entropy(*a) + 0.5 * entropy(*b)).epsilon(1e-12));
  CHECK(lyapunov(*m).est == doctest::Approx(std::log(2.0)).epsilon(1e-9));

  CHECK_THROWS_AS(mix({{0.7, a}, {0.7, b}}), InputError);
  CHECK_THROWS_AS(mix({}), InputError);
}

TEST_CASE("free energy") {
  const auto two = builtin_linear(2);
  const auto c = make_bernoulli_cert(*two, {0, 1}, {0.5, 0.5});
  CHECK(free_energy(*c, 0.0).est == doctest::Approx(entropy(*c)));
  CHECK(free_energy(*c, 1.0).est == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("stationarity and serialization") {
  const auto two = builtin_linear(2);
  std::mt19937 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = 0.1 + 0.8 * (rng() % 1000) / 1000.0;
    const double b = 0.1 + 0.8 * (rng() % 1000) / 1000.0;
    std::vector<std::vector<CertEdge>> edges(2);
    edges[0] = {{0, a, 0, 0, 0}, {1, 1 - a, 0, 0, 0}};
    edges[1] = {{0, b, 0, 0, 0}, {1, 1 - b, 0, 0, 0}};
    const auto c = make_markov_cert(*two, {0, 1}, 1, {{0}, {1}}, edges);
    CHECK(stationarity_residual(*c) <= 1e-10);

    const auto back = Certificate::from_json(c->to_json());
    CHECK(back->to_json() == c->to_json());  // bit-exact round trip
    CHECK(back->h == c->h);
    CHECK(back->chi.lo == c->chi.lo);
    CHECK(back->stationary == c->stationary);
  }

  const auto r = builtin_renyi();
  const auto dp = make_periodic_cert(*r, {2, 3});
  const auto back = Certificate::from_json(dp->to_json());
  CHECK(back->to_json() == dp->to_json());
  CHECK(back->id() == dp->id());
}

TEST_CASE("invalid certificates are rejected") {
  const auto r = builtin_renyi();
  CHECK_THROWS_AS(make_periodic_cert(*r, {2, 2}), InputError);  // not primitive
  CHECK_THROWS_AS(make_periodic_cert(*r, {}), InputError);

  const auto two = builtin_linear(2);
  std::vector<std::vector<CertEdge>> bad(2);
  bad[0] = {{0, 0.6, 0, 0, 0}, {1, 0.6, 0, 0, 0}};
  bad[1] = {{0, 0.5, 0, 0, 0}, {1, 0.5, 0, 0, 0}};
  CHECK_THROWS_AS(make_markov_cert(*two, {0, 1}, 1, {{0}, {1}}, bad), InputError);
}

#include <cmath>

#include "doctest.h"
#include "thermospec/inducing.hpp"

using namespace thermospec;

TEST_CASE("renyi jump transform builds and validates") {
  const auto sch = renyi_jump_scheme(30, 8);
  CHECK(sch.fully_branched);
  CHECK(sch.patterns.size() == 31u * 7u);
  CHECK(sch.transcript.size() >= 3);

  // Branch for pattern 1^k a is uniformly expanding: the last symbol's
  // derivative is at least 4.
  double min_inf = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < sch.patterns.size(); ++i)
    min_inf = std::min(min_inf, sch.induced->inf_abs_derivative(static_cast<Symbol>(i)));
  CHECK(min_inf > 1.0);

  // tau and S_tau(b1) for pattern 1^k a: tau = k+1, S_tau(b1) = 2k + (a+1).
  const auto tau = sch.tau_observable();
  const auto sb1 = sch.lift_observable(Observable::digit_value());
  for (size_t i = 0; i < sch.patterns.size(); ++i) {
    const auto& p = sch.patterns[i];
    const long long k = static_cast<long long>(p.word.size()) - 1;
    const Symbol a = p.word.back();
    CHECK(tau.value_on({static_cast<Symbol>(i)}) == doctest::Approx(k + 1.0));
    CHECK(sb1.value_on({static_cast<Symbol>(i)}) ==
          doctest::Approx(2.0 * k + static_cast<double>(a + 1)));
  }

  // The pattern cylinders tile [0,1) up to the (k, a) truncation tails; the
  // covered length grows toward 1 with the caps.
  auto covered = [](const InducingScheme& s) {
    double total = 0.0;
    for (size_t i = 0; i < s.patterns.size(); ++i)
      total += s.induced->branch(static_cast<Symbol>(i)).domain.width();
    return total;
  };
  const double c1 = covered(sch);
  CHECK(c1 > 0.75);
  CHECK(c1 < 1.0 + 1e-9);
  const double c2 = covered(renyi_jump_scheme(60, 24));
  CHECK(c2 > c1);
  CHECK(c2 > 0.9);
}

TEST_CASE("trivial scheme tau = 1 reproduces the base map") {
  // linear(2) with patterns {0, 1}, tau = 1: induced = base.
  PatternGenerator g;
  g.prefix_symbol = 0;
  g.repeat_lo = 0;
  g.repeat_hi = 0;
  g.suffix_set = {0, 1};
  const auto sch = build_jump_transform(builtin_linear(2), {g});
  REQUIRE(sch.patterns.size() == 2);
  CHECK(sch.patterns[0].tau == 1);
  const Branch& b0 = sch.induced->branch(0);
  CHECK(b0.forward(0.25) == doctest::Approx(0.5));
  CHECK(b0.dforward(0.1) == doctest::Approx(2.0));

  // Projection through tau = 1 is the identity on h, chi.
  const auto cert = make_bernoulli_cert(*sch.induced, {0, 1}, {0.25, 0.75});
  const auto proj = project_measure(sch, cert);
  CHECK(proj->tau_mean == doctest::Approx(1.0));
  CHECK(proj->h == doctest::Approx(cert->h));
  CHECK(proj->chi.est == doctest::Approx(cert->chi.est));
  CHECK(proj->dim.est == doctest::Approx(cert->dim.est).epsilon(1e-12));
}

TEST_CASE("scheme JSON round trip") {
  const auto sch = renyi_jump_scheme(5, 3);
  const auto back = scheme_from_json(sch.to_json());
  CHECK(back.patterns.size() == sch.patterns.size());
  CHECK(back.base->name() == "renyi");
}

TEST_CASE("distortion constants") {
  // Affine branches: zero distortion.
  PatternGenerator g;
  g.prefix_symbol = 0;
  g.repeat_lo = 0;
  g.repeat_hi = 0;
  g.suffix_set = {0, 1};
  const auto lin = build_jump_transform(builtin_linear(2), {g});
  const auto dl = estimate_distortion_constant(lin, 16, 2000);
  CHECK(dl.sampled == doctest::Approx(0.0).epsilon(1e-9));

  const auto sch = renyi_jump_scheme(20, 6);
  const auto dr = estimate_distortion_constant(sch, 64, 4000);
  CHECK(dr.sampled > 0.0);
  REQUIRE(dr.closed_form.has_value());
  CHECK(dr.c0 == doctest::Approx(16.0));  // sup 2/(1-x)^3 over [0, 1/2]
  CHECK(std::isfinite(*dr.closed_form));
  // The closed-form constant dominates every sampled pair by a wide margin.
  CHECK(dr.sampled <= *dr.closed_form * (1 + 1e-6));
}

TEST_CASE("abramov projection of an induced periodic orbit") {
  // Pattern (1,2): tau = 2, base orbit has digits 2,3,2,3,...
  const auto sch = renyi_jump_scheme(8, 4);
  Symbol pat12 = -1;
  for (size_t i = 0; i < sch.patterns.size(); ++i)
    if (sch.patterns[i].word == Word{1, 2}) pat12 = static_cast<Symbol>(i);
  REQUIRE(pat12 >= 0);

  const auto dirac = make_periodic_cert(*sch.induced, {pat12});
  const auto proj = project_measure(sch, dirac, {Observable::digit_value()});
  CHECK(proj->tau_mean == doctest::Approx(2.0));
  CHECK(proj->h == doctest::Approx(0.0));

  // Base chi = (1/2) log |(f^2)'(x)| at the period-2 point with digits 2,3.
  const auto base_orbit = make_periodic_cert(*builtin_renyi(), {1, 2});
  CHECK(proj->chi.est == doctest::Approx(lyapunov(*base_orbit).est).epsilon(1e-9));
  // Mean digit along the 2,3 cycle.
  CHECK(proj->integrals.at("b1").est == doctest::Approx(2.5).epsilon(1e-12));

  // Dimension is invariant under the projection (h = 0 on both sides here).
  CHECK(proj->dim.est == doctest::Approx(dirac->dim.est));
}

TEST_CASE("dimension invariance under inducing at the bowen root") {
  // Finite induced subsystem: equilibrium at its root has dim = root; the
  // projected certificate keeps that dimension.
  const auto sch = renyi_jump_scheme(12, 4);
  const auto sys = build_subsystem(sch.induced, [&] {
    std::vector<Symbol> ids;
    for (size_t i = 0; i < sch.patterns.size(); ++i) ids.push_back(static_cast<Symbol>(i));
    return ids;
  }(), 1);
  const auto root = bowen_root(sys);
  const auto eq = equilibrium(sys, PotentialSpec::geometric(root.est));
  const auto proj = project_measure(sch, eq, {Observable::digit_value()});
  CHECK(dimension(*eq).value.est == doctest::Approx(root.est).epsilon(1e-8));
  CHECK(proj->dim.est == doctest::Approx(root.est).epsilon(1e-8));
  CHECK(proj->h < eq->h);  // scaled down by the mean return time
  CHECK(std::isfinite(proj->integrals.at("b1").est));
}

TEST_CASE("parabolic bowen root basics") {
  // Digits bounded by 2: E(2) = {0}, dimension zero.
  const auto zero = parabolic_bowen_root(builtin_renyi(), {1});
  CHECK(zero.exact_zero);
  CHECK(zero.est == 0.0);

  // E(3): digits in {2,3}.
  ParabolicRootOptions opts;
  opts.cell_sizes = {4e-3, 1e-3};
  const auto t3 = parabolic_bowen_root(builtin_renyi(), {1, 2}, opts);
  REQUIRE(t3.levels.size() == 2);
  CHECK(t3.est > 0.5);
  CHECK(t3.est < 1.0);
  CHECK(t3.t.lo <= t3.est);
  CHECK(t3.est <= t3.t.hi);
  // Bracket is tight and stable across levels.
  CHECK(t3.t.width() < 5e-3);
  CHECK(std::abs(t3.levels[0].est - t3.levels[1].est) < 2e-3);

  // Monotone in the subalphabet.
  const auto t4 = parabolic_bowen_root(builtin_renyi(), {1, 2, 3}, opts);
  CHECK(t4.est > t3.est);

  // No neutral symbol: falls back to the direct route.
  const auto direct = parabolic_bowen_root(builtin_renyi(), {2, 3});
  CHECK(direct.est > 0.0);
  CHECK(direct.levels.size() == 1);
}

TEST_CASE("scheme validation failures are named") {
  // Patterns 1^k 1 would start with the neutral fixed point in the orbit.
  PatternGenerator g;
  g.prefix_symbol = 1;
  g.repeat_lo = 0;
  g.repeat_hi = 3;
  g.suffix_set = {1};
  CHECK_THROWS_AS(build_jump_transform(builtin_renyi(), {g}), SchemeValidationError);
}

#include <cmath>
#include <random>

#include "doctest.h"
#include "thermospec/fuchsian.hpp"

using namespace thermospec;

TEST_CASE("isometric circles") {
  const auto ic = isometric_circle(Mobius::uhp(1, 0, 2, 1));
  CHECK(std::abs(ic.center - Cplx(-0.5, 0.0)) < 1e-12);
  CHECK(ic.radius == doctest::Approx(0.5));

  CHECK_THROWS_AS(isometric_circle(Mobius::uhp(1, 2, 0, 1)), InputError);

  // |g'| = 1 on the circle, sampled.
  std::mt19937 rng(5);
  for (const auto& g : {Mobius::uhp(1, 0, 2, 1).to_disk(), Mobius::uhp(1, 2, 0, 1).to_disk(),
                        Mobius::uhp(2, 1, 1, 1).to_disk()}) {
    const auto c = isometric_circle(g);
    for (int s = 0; s < 32; ++s) {
      const double t = 2.0 * M_PI * s / 32.0;
      const Cplx z = c.center + std::polar(c.radius, t);
      CHECK(std::abs(std::abs(g.derivative(z)) - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("mobius classification and fixed points") {
  CHECK(Mobius::uhp(1, 2, 0, 1).classify() == Mobius::Class::kParabolic);
  CHECK(Mobius::uhp(2, 0, 0, 0.5).classify() == Mobius::Class::kHyperbolic);
  CHECK(Mobius::uhp(0, -1, 1, 0).classify() == Mobius::Class::kElliptic);

  const auto gd = Mobius::uhp(1, 2, 0, 1).to_disk();
  const auto fp = gd.fixed_points();
  REQUIRE(fp.size() == 1);
  CHECK(std::abs(fp[0] - Cplx(1, 0)) < 1e-9);  // C(inf) = 1
  CHECK(std::abs(std::abs(gd.det()) - 1.0) < 1e-12);
}

TEST_CASE("default example group builds") {
  const auto gens = GeneratorSet::default_example();
  CHECK(gens.gens.size() == 4);
  CHECK(gens.num_cusps == 2);
  for (bool p : gens.parabolic) CHECK(p);

  const auto bs = build_bowen_series(gens);
  REQUIRE(bs.arcs.size() == 4);
  double total = 0.0;
  for (const auto& a : bs.arcs) total += a.length();
  CHECK(total < 2 * M_PI);  // second kind: free boundary intervals remain
  CHECK(total > 0.5);

  // Sampled limit points (long random reduced words applied to the origin)
  // land inside the arc system.
  {
    std::mt19937 lrng(3);
    for (int trial = 0; trial < 200; ++trial) {
      Cplx z(0.0, 0.0);
      int prev = -1;
      Mobius acc{1.0, 0.0, 0.0, 1.0};
      for (int j = 0; j < 24; ++j) {
        int g;
        do {
          g = static_cast<int>(lrng() % 4);
        } while (prev >= 0 && gens.inverse_of[static_cast<size_t>(prev)] == g);
        acc = acc.compose(gens.gens[static_cast<size_t>(g)]);
        prev = g;
      }
      const Cplx w = acc.apply(z);
      const double theta = std::arg(w) < 0 ? std::arg(w) + 2 * M_PI : std::arg(w);
      bool inside = false;
      for (const auto& a : bs.arcs) {
        for (int shift = -1; shift <= 1; ++shift) {
          const double t = theta + shift * 2 * M_PI;
          if (t >= a.lo - 1e-6 && t <= a.hi + 1e-6) inside = true;
        }
      }
      CHECK(inside);
    }
  }

  // Parabolic pairs touch exactly at the two cusps, angles 0 and pi.
  CHECK(bs.facade->neutral().size() >= 2);

  // |f'| >= 1 on each arc, equality only near the cusp points.
  for (Symbol s = 0; s < 4; ++s) {
    const Branch& b = bs.facade->branch(s);
    const auto range = b.abs_derivative_range(b.domain);
    CHECK(range.lo >= 1.0 - 1e-9);
    CHECK(range.hi > 1.0);
  }

  // Coding: random reduced words produce nested cylinders that the sampled
  // limit points inhabit.
  const auto c = cylinder(*bs.facade, {0, 2, 0, 3});
  CHECK(c.diameter() > 0);
  CHECK(c.diameter() < bs.arcs[0].length());

  CHECK(bs.arcs_csv().rfind("symbol,theta_lo,theta_hi", 0) == 0);
}

TEST_CASE("block decomposition") {
  const auto gens = GeneratorSet::default_example();
  // gens order: 0 = A, 1 = A^{-1}, 2 = B, 3 = B^{-1}.
  const auto seq = block_decompose({0, 0, 3}, gens);
  REQUIRE(seq.blocks.size() == 2);
  CHECK(seq.blocks[0].generator == 0);
  CHECK(seq.blocks[0].run == 2);
  CHECK(seq.blocks[0].winding == 1);  // a_{1,1} = n - 1
  CHECK(seq.blocks[1].run == 1);
  CHECK(seq.blocks[1].winding == 0);

  const auto single = block_decompose({2}, gens);
  REQUIRE(single.blocks.size() == 1);
  CHECK(single.blocks[0].winding == 0);

  const auto run5 = block_decompose({1, 1, 1, 1, 1}, gens);
  REQUIRE(run5.blocks.size() == 1);
  CHECK(run5.blocks[0].winding == 4);

  CHECK_THROWS_AS(block_decompose({0, 1}, gens), InputError);  // g g^{-1}

  // Round trip on random reduced words.
  std::mt19937 rng(12);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<int> word;
    int prev = -1;
    const int len = 1 + static_cast<int>(rng() % 12);
    while (static_cast<int>(word.size()) < len) {
      const int g = static_cast<int>(rng() % 4);
      if (prev >= 0 && gens.inverse_of[static_cast<size_t>(prev)] == g) continue;
      word.push_back(g);
      prev = g;
    }
    const auto blocks = block_decompose(word, gens);
    CHECK(blocks.concatenate() == word);
  }
}

TEST_CASE("cusp induced system") {
  const auto bs = build_bowen_series(GeneratorSet::default_example());
  const int cutoff = 12;
  const auto sys = build_cusp_induced_map(bs, cutoff);
  // |Gamma_0| (|G_0| - 2) n patterns with run <= n, H_0 empty.
  CHECK(sys.scheme.patterns.size() == 4u * 2u * cutoff);
  CHECK_FALSE(sys.scheme.fully_branched);

  // a_{1,j} on pattern gamma^n g is n - 1; zero on other cusps.
  REQUIRE(sys.windings.size() == 2);
  for (size_t i = 0; i < sys.scheme.patterns.size(); ++i) {
    const auto& p = sys.scheme.patterns[i];
    const int gidx = static_cast<int>(p.word.front());
    const int run = static_cast<int>(p.word.size()) - 1;
    const int cusp = bs.gens.cusp_of[static_cast<size_t>(gidx)];
    CHECK(sys.windings[static_cast<size_t>(cusp)].value_on({static_cast<Symbol>(i)}) ==
          doctest::Approx(run - 1.0));
    CHECK(sys.windings[static_cast<size_t>(1 - cusp)].value_on({static_cast<Symbol>(i)}) ==
          doctest::Approx(0.0));
    CHECK(p.tau == run);
  }

  // Induced expansion: the jump transform removed the neutrality.
  double min_inf = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < sys.scheme.patterns.size(); ++i)
    min_inf = std::min(min_inf,
                       sys.scheme.induced->inf_abs_derivative(static_cast<Symbol>(i)));
  CHECK(min_inf > 1.0);
}

TEST_CASE("arc decay exponent is ~ -2") {
  const auto bs = build_bowen_series(GeneratorSet::default_example());
  const auto fit = cusp_arc_decay(bs, 0, 2, 120);
  CHECK(fit.slope == doctest::Approx(-2.0).epsilon(0.05));
  CHECK(fit.residual < 0.1);
}

TEST_CASE("cusp winding spectrum") {
  const auto bs = build_bowen_series(GeneratorSet::default_example());
  Schedule sched;
  sched.eps = {1e-1, 1e-2};
  sched.alphabets = {{0, 3}, {0, 3}};
  sched.depths = {1, 1};

  // alpha = 0: hyperbolic-free group still has zero-winding patterns (n = 1).
  const auto r0 = cusp_winding_spectrum(bs, {0.0, 0.0}, sched, 10);
  CHECK(r0.feasible);
  CHECK(r0.lower_bound_est > 0.1);
  CHECK_FALSE(r0.beta_floor_applied);  // winding observables are unbounded

  const auto r1 = cusp_winding_spectrum(bs, {1.0, 0.5}, sched, 10);
  CHECK(r1.feasible);
  CHECK(r1.lower_bound_est > 0.1);

  CHECK_THROWS_AS(cusp_winding_spectrum(bs, {-1.0, 0.0}, sched, 10), InputError);
  CHECK_THROWS_AS(cusp_winding_spectrum(bs, {0.0}, sched, 10), InputError);
}

TEST_CASE("cusp frequency spectrum") {
  const auto bs = build_bowen_series(GeneratorSet::default_example());
  Schedule sched;
  sched.eps = {1e-1, 1e-2};
  sched.alphabets = {{0, 3}, {0, 3}};
  sched.depths = {1, 1};

  // Escaping winding mass: exactly 1/2.
  CuspFrequency esc;
  esc.entries = {{0, 1, 0.4}, {1, 2, 0.3}};
  const auto r = cusp_frequency_spectrum(bs, esc, sched, 8);
  CHECK(r.exact);
  CHECK(r.value == 0.5);

  // Full mass on zero-winding cells: solver runs, floor applies.
  CuspFrequency full;
  full.entries = {{0, 1, 0.5}, {0, 2, 0.5}};
  const auto r2 = cusp_frequency_spectrum(bs, full, sched, 8);
  CHECK(r2.feasible);
  CHECK(r2.lower_bound >= 0.5);
  CHECK(r2.beta_floor_applied);

  CuspFrequency bad;
  bad.entries = {{0, 1, 0.8}, {0, 2, 0.4}};
  CHECK_THROWS_AS(cusp_frequency_spectrum(bs, bad, sched, 8), InputError);
}

TEST_CASE("conjugation invariance") {
  const auto gens = GeneratorSet::default_example();
  const auto bs = build_bowen_series(gens);

  // Rotate the disk by phi: arcs rotate accordingly.
  const double phi = 0.7;
  GeneratorSet rot = gens;
  const Mobius r{std::polar(1.0, phi / 2), 0.0, 0.0, std::polar(1.0, -phi / 2)};
  const Mobius rinv = r.inverse();
  for (auto& g : rot.gens) g = r.compose(g).compose(rinv).normalized();
  for (auto& p : rot.fixed_point) p *= std::polar(1.0, phi);
  const auto bs2 = build_bowen_series(rot);
  for (size_t i = 0; i < bs.arcs.size(); ++i) {
    const double want = std::fmod(bs.arcs[i].lo + phi, 2 * M_PI);
    const double got = std::fmod(bs2.arcs[i].lo, 2 * M_PI);
    const double diff = std::abs(want - got);
    CHECK(std::min(diff, 2 * M_PI - diff) < 1e-9);
    CHECK(bs2.arcs[i].length() == doctest::Approx(bs.arcs[i].length()).epsilon(1e-9));
  }

  // Dimension data of the induced systems agree within bracket width.
  const auto s1 = build_cusp_induced_map(bs, 10);
  const auto s2 = build_cusp_induced_map(bs2, 10);
  std::vector<Symbol> ids(s1.scheme.patterns.size());
  for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<Symbol>(i);
  const auto root1 = bowen_root(build_subsystem(s1.scheme.induced, ids, 1));
  const auto root2 = bowen_root(build_subsystem(s2.scheme.induced, ids, 1));
  CHECK(std::abs(root1.est - root2.est) <
        std::max(root1.t.width(), root2.t.width()) + 1e-6);
}

TEST_CASE("generators from JSON validate") {
  // A symmetric set that is too small.
  CHECK_THROWS_AS(GeneratorSet::from_json(R"({"model":"H","matrices":[[1,2,0,1]]})"),
                  InputError);
  // Hyperbolic + parabolic mix loads fine.
  const auto gs =
      GeneratorSet::from_json(R"({"model":"H","matrices":[[1,2,0,1],[1,0,2,1]]})");
  CHECK(gs.gens.size() == 4);
}

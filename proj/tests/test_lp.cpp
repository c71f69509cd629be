#include <cmath>

#include "doctest.h"
#include "pareg/lp.hpp"

using namespace pareg;

TEST_CASE("trivial feasibility") {
  CHECK(lp_feasible(LPInstance(2), 1));
  LPInstance inst(1);
  inst.add(std::vector<double>{1.0}, 1.0);
  inst.add(std::vector<double>{-1.0}, -2.0);
  CHECK_FALSE(lp_feasible(inst, 1));
}

TEST_CASE("planted interior points are always found feasible") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    CounterRng rng(seed, 7);
    const int n = 1 + static_cast<int>(rng.below(9));
    const int m = 1 + static_cast<int>(rng.below(60));
    std::vector<double> z(static_cast<std::size_t>(n));
    for (double& v : z) v = rng.uniform(-5.0, 5.0);
    LPInstance inst(n);
    std::vector<double> a(static_cast<std::size_t>(n));
    for (int i = 0; i < m; ++i) {
      double dot = 0.0;
      for (int k = 0; k < n; ++k) {
        a[static_cast<std::size_t>(k)] = rng.normal();
        dot += a[static_cast<std::size_t>(k)] * z[static_cast<std::size_t>(k)];
      }
      inst.add(a, dot + rng.uniform(0.0, 1.0));
    }
    CHECK(lp_feasible(inst, seed));
  }
}

TEST_CASE("minimization matches a small hand-solved LP") {
  // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0: optimum (1.6, 1.2).
  LPInstance inst(2);
  inst.add(std::vector<double>{1, 2}, 4);
  inst.add(std::vector<double>{3, 1}, 6);
  inst.add(std::vector<double>{-1, 0}, 0);
  inst.add(std::vector<double>{0, -1}, 0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = lp_minimize(inst, std::vector<double>{-1, -1}, seed);
    REQUIRE(r.feasible);
    CHECK(r.x[0] == doctest::Approx(1.6).epsilon(1e-12));
    CHECK(r.x[1] == doctest::Approx(1.2).epsilon(1e-12));
  }
}

TEST_CASE("working set agrees with the direct solve") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CounterRng rng(seed, 3);
    const int n = 2 + static_cast<int>(rng.below(5));
    LPInstance inst(n);
    std::vector<double> a(static_cast<std::size_t>(n));
    for (int i = 0; i < 6000; ++i) {
      double nrm = 0.0;
      for (double& v : a) {
        v = rng.normal();
        nrm += v * v;
      }
      for (double& v : a) v /= std::sqrt(nrm);
      inst.add(a, 1.0 + rng.uniform(0.0, 0.1));
    }
    std::vector<double> c(static_cast<std::size_t>(n));
    for (double& v : c) v = rng.normal();
    const auto big = lp_minimize(inst, c, seed);
    CounterRng r2(seed);
    const auto direct = seidel_minimize(n, inst.rows, c, r2);
    REQUIRE(big.feasible);
    REQUIRE(direct.feasible);
    CHECK(big.objective == doctest::Approx(direct.objective).epsilon(1e-9));
  }
}

TEST_CASE("infeasible systems in higher dimension") {
  LPInstance inst(3);
  inst.add(std::vector<double>{1, 1, 1}, 1);
  inst.add(std::vector<double>{-1, -1, -1}, -2);
  CHECK_FALSE(lp_feasible(inst, 4));
}

TEST_CASE("leading rows change the insertion order, not the optimum") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    CounterRng rng(seed, 5);
    const int n = 2 + static_cast<int>(rng.below(5));
    LPInstance inst(n);
    std::vector<double> a(static_cast<std::size_t>(n));
    for (int i = 0; i < 300; ++i) {
      for (double& v : a) v = rng.normal();
      inst.add(a, 1.0 + rng.uniform(0.0, 0.5));
    }
    std::vector<double> c(static_cast<std::size_t>(n));
    for (double& v : c) v = rng.normal();
    CounterRng r1(seed);
    const auto ref = seidel_minimize(n, inst.rows, c, r1);
    for (std::size_t leading : {std::size_t{1}, std::size_t{40}, std::size_t{300}, std::size_t{1000}}) {
      CounterRng r2(seed);
      const auto lead = seidel_minimize(n, inst.rows, c, r2, kLpBox, leading);
      REQUIRE(lead.feasible);
      CHECK(lead.objective == doctest::Approx(ref.objective).epsilon(1e-9));
    }
  }
}

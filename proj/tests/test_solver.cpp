#include <cmath>

#include "doctest.h"
#include "pareg/solver.hpp"

using namespace pareg;

namespace {

GridPtr disk(int n) { return make_grid(2, n, 1.0, Domain{DomainShape::ball, 1.0}); }

const EllipticityPair kUnit{1.0, 1.0};
const EllipticityPair kPair{1.0, 2.0};

DiscreteProblem problem(const Operator& op, const GridPtr& g, const GridFn& b) {
  return DiscreteProblem{op, g, Stencil::standard(g->dim()), b, Scheme::monotone_frames, 1e-10};
}

GridFn trig(const GridPtr& g, CounterRng& rng) {
  const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1), c = rng.uniform(-1, 1);
  const double k1 = rng.uniform(0.5, 3), k2 = rng.uniform(0.5, 3), ph = rng.uniform(0, 6.28);
  return sample([=](const Point& x) { return a * std::sin(k1 * x[0] + ph) + b * std::cos(k2 * x[1]) + c * x[0] * x[1]; }, g);
}

}  // namespace

TEST_CASE("second differences") {
  const auto g = disk(8);
  const std::size_t o = g->nearest_node({0.25, -0.125, 0});
  const GridFn half = sample([](const Point& x) { return 0.5 * (x[0] * x[0] + x[1] * x[1]); }, g);
  CHECK(second_diff(half, {1, 0, 0}, o) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(second_diff(half, {0, 1, 0}, o) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(second_diff(half, {2, -1, 0}, o) == doctest::Approx(1.0).epsilon(1e-12));
  const GridFn aff = sample([](const Point& x) { return 3.0 - x[0] + 2 * x[1]; }, g);
  CHECK(std::abs(second_diff(aff, {1, 1, 0}, o)) <= 1e-10);
  const GridFn x1 = sample([](const Point& x) { return 0.5 * x[0] * x[0]; }, g);
  CHECK(second_diff(x1, {1, 1, 0}, o) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(second_diff(half, {1, 0, 0}, g->linear_index({16, 8, 0})), InputError);
}

TEST_CASE("stencil validation") {
  CHECK(Stencil::standard(2).size() == 8);
  CHECK(Stencil::standard(3).size() == 13);
  CHECK_THROWS_AS((Stencil{2, {{1, 1, 0}}}.validate()), InputError);
  CHECK_THROWS_AS((Stencil{2, {{1, 0, 0}, {0, 1, 0}, {-1, 0, 0}}}.validate()), InputError);
}

TEST_CASE("nonnegative frame fits") {
  const auto id = nonnegative_frame_fit(SymMat::identity(2), Stencil::axes(2));
  CHECK(id.coeffs == std::vector<double>{1.0, 1.0});
  const auto dg = nonnegative_frame_fit(SymMat::from_rows({{1, 0}, {0, 2}}), Stencil::axes(2));
  CHECK(dg.coeffs[0] == doctest::Approx(1.0));
  CHECK(dg.coeffs[1] == doctest::Approx(2.0));
  // Normalized diagonal projectors: (1,1)(1,1)^T / 2 carries weight 2.
  const auto od = nonnegative_frame_fit(SymMat::from_rows({{2, 1}, {1, 2}}), Stencil::axes_diagonals(2));
  REQUIRE(od.coeffs.size() == 4);
  CHECK(od.coeffs[0] == doctest::Approx(1.0));
  CHECK(od.coeffs[1] == doctest::Approx(1.0));
  CHECK(od.coeffs[2] == doctest::Approx(2.0));
  CHECK(od.coeffs[3] == doctest::Approx(0.0));
  CHECK(od.residual <= 1e-12);
  CHECK_THROWS_AS(nonnegative_frame_fit(SymMat::from_rows({{1, 0.9}, {0.9, 1}}), Stencil::axes(2)), InputError);
  CounterRng rng(11);
  for (int t = 0; t < 50; ++t) {
    // Random matrices with spectrum in [1, 4] fit on the standard stencil.
    const double th = rng.uniform(0, 3.14159), l1 = rng.uniform(1, 4), l2 = rng.uniform(1, 4);
    const double c = std::cos(th), s = std::sin(th);
    const SymMat a = SymMat::from_rows({{l1 * c * c + l2 * s * s, (l1 - l2) * c * s}, {(l1 - l2) * c * s, l1 * s * s + l2 * c * c}});
    const auto f = nonnegative_frame_fit(a, Stencil::standard(2));
    for (double v : f.coeffs) CHECK(v >= 0.0);
    CHECK(f.residual <= 1e-10 * (1 + a.frobenius_norm()));
  }
}

TEST_CASE("Pucci scheme family") {
  const auto fam = scheme_family(pucci_operator(2, kPair, PucciSign::plus), Stencil::axes_diagonals(2));
  CHECK(fam.n_inf == 1);
  CHECK(fam.matrices.size() == static_cast<std::size_t>(fam.n_sup));
  // Two orthogonal frames with four weightings each; lambda I and Lambda I repeat.
  CHECK(fam.matrices.size() == 6);
  fam.validate(kPair);
}

TEST_CASE("discrete degenerate ellipticity") {
  const auto g = disk(10);
  CounterRng rng(3);
  const SymMat a = SymMat::from_rows({{1.5, 0.3}, {0.3, 1.2}});
  const SymMat b = SymMat::from_rows({{1.3, -0.3}, {-0.3, 1.7}});
  const std::vector<Operator> ops = {
      pucci_operator(2, kPair, PucciSign::plus), pucci_operator(2, kPair, PucciSign::minus),
      isaacs_smoothed(IsaacsFamily{1, 2, {a, b}}, kPair, 0.05), isaacs_exact(IsaacsFamily{2, 1, {a, b}}, kPair)};
  for (const auto& op : ops) {
    const GridFn zero = sample([](const Point&) { return 0.0; }, g);
    const DiscreteOperator dop(problem(op, g, zero));
    GridFn u = zero;
    for (std::size_t k : g->domain_nodes()) u.values[k] = rng.normal();
    for (int t = 0; t < 40; ++t) {
      const std::size_t x = dop.interior()[rng.below(dop.interior().size())];
      const double f0 = dop.residual_at(u, x);
      const Index e = Stencil::standard(2).directions[rng.below(8)];
      const std::size_t nb = *g->neighbor(x, e);
      GridFn v = u;
      v.values[nb] += rng.uniform(0.01, 1.0);
      CHECK(dop.residual_at(v, x) <= f0 + 1e-12);
    }
  }
}

TEST_CASE("Jacobian matches finite differences of the residual") {
  const auto g = disk(6);
  const GridFn zero = sample([](const Point&) { return 0.0; }, g);
  const SymMat a = SymMat::from_rows({{1.5, 0.3}, {0.3, 1.2}});
  const SymMat b = SymMat::from_rows({{1.3, -0.3}, {-0.3, 1.7}});
  const Operator op = isaacs_smoothed(IsaacsFamily{1, 2, {a, b}}, kPair, 0.5);
  for (Scheme sc : {Scheme::monotone_frames, Scheme::fd_hessian}) {
    DiscreteProblem p = problem(op, g, zero);
    p.scheme = sc;
    const DiscreteOperator dop(p);
    CounterRng rng(5);
    GridFn u = zero;
    for (std::size_t k : g->domain_nodes()) u.values[k] = 0.01 * rng.normal();
    const auto lin = dop.linearize(u);
    const std::size_t n = dop.interior().size();
    std::vector<double> dense(n * n, 0.0);
    for (std::size_t t = 0; t < lin.values.size(); ++t) dense[lin.rows[t] * n + lin.cols[t]] += lin.values[t];
    const double eps = 1e-7;
    for (std::size_t c = 0; c < n; c += 3) {
      GridFn up = u, dn = u;
      up.values[dop.interior()[c]] += eps;
      dn.values[dop.interior()[c]] -= eps;
      const auto rp = dop.residual(up);
      const auto rm = dop.residual(dn);
      for (std::size_t r = 0; r < n; ++r) CHECK(dense[r * n + c] == doctest::Approx((rp[r] - rm[r]) / (2 * eps)).epsilon(1e-4).scale(1.0));
    }
  }
}

TEST_CASE("harmonic quadratic is reproduced") {
  const auto g = disk(32);
  const GridFn b = sample([](const Point& x) { return x[0] * x[0] - x[1] * x[1]; }, g);
  const Operator lap = linear_operator(SymMat::identity(2), kUnit);
  for (SolveMethod m : {SolveMethod::newton, SolveMethod::explicit_euler}) {
    SolveOptions opt;
    opt.method = m;
    opt.max_iters = 20000;
    const auto res = solve_dirichlet(problem(lap, g, b), opt);
    CHECK(res.converged);
    double err = 0.0;
    for (std::size_t k : g->domain_nodes()) err = std::max(err, std::abs(res.u.values[k] - b.values[k]));
    CHECK(err <= 10 * opt.tol);
  }
}

TEST_CASE("zero data and constant shift") {
  const auto g = disk(16);
  const GridFn zero = sample([](const Point&) { return 0.0; }, g);
  const Operator op = pucci_operator(2, kPair, PucciSign::plus);
  const auto res = solve_dirichlet(problem(op, g, zero), {});
  CHECK(res.converged);
  CHECK(res.u.sup_abs() == 0.0);
  CounterRng rng(8);
  const GridFn g1 = trig(g, rng);
  GridFn g2 = g1;
  for (double& v : g2.values) v += 1.0;
  SolveOptions opt;
  const auto cmp = comparison_check(problem(op, g, g1), g1, g2, opt);
  CHECK(cmp.holds);
  CHECK(cmp.min_gap >= 1.0 - 10 * opt.tol);
  CHECK(comparison_check(problem(op, g, g1), g1, g1, opt).holds);
}

TEST_CASE("boundary values are attained and affine invariance") {
  const auto g = disk(16);
  CounterRng rng(21);
  const GridFn b = trig(g, rng);
  const Operator op = pucci_operator(2, kPair, PucciSign::minus);
  const auto r1 = solve_dirichlet(problem(op, g, b), {});
  REQUIRE(r1.converged);
  const DiscreteOperator dop(problem(op, g, b));
  for (std::size_t k : dop.dirichlet()) CHECK(r1.u.values[k] == b.values[k]);
  GridFn b2 = b;
  for (std::size_t k = 0; k < g->size(); ++k) b2.values[k] += 0.3 - 0.7 * g->coord(k)[0] + 0.2 * g->coord(k)[1];
  const auto r2 = solve_dirichlet(problem(op, g, b2), {});
  REQUIRE(r2.converged);
  for (std::size_t k : g->domain_nodes()) {
    const Point x = g->coord(k);
    CHECK(std::abs(r2.u.values[k] - r1.u.values[k] - (0.3 - 0.7 * x[0] + 0.2 * x[1])) <= 1e-7);
  }
}

TEST_CASE("comparison on random boundary pairs") {
  const auto g = disk(12);
  const SymMat a = SymMat::from_rows({{1.5, 0.3}, {0.3, 1.2}});
  const SymMat b = SymMat::from_rows({{1.3, -0.3}, {-0.3, 1.7}});
  const std::vector<Operator> ops = {pucci_operator(2, kPair, PucciSign::plus),
                                     isaacs_smoothed(IsaacsFamily{1, 2, {a, b}}, kPair, 0.05)};
  CounterRng rng(99);
  for (const auto& op : ops) {
    for (int s = 0; s < 5; ++s) {
      const GridFn g1 = trig(g, rng);
      const GridFn bump = trig(g, rng);
      GridFn g2 = g1;
      for (std::size_t k = 0; k < g->size(); ++k) g2.values[k] += std::abs(bump.values[k]);
      CHECK(comparison_check(problem(op, g, g1), g1, g2, {}).holds);
    }
  }
}

TEST_CASE("fd-hessian scheme requires a derivative-free fallback only for smooth data") {
  const auto g = disk(16);
  const GridFn b = sample([](const Point& x) { return x[0] * x[0] - x[1] * x[1] + x[0] * x[1]; }, g);
  DiscreteProblem p = problem(linear_operator(SymMat::identity(2), kUnit), g, b);
  p.scheme = Scheme::fd_hessian;
  const auto res = solve_dirichlet(p, {});
  CHECK(res.converged);
  for (std::size_t k : g->domain_nodes()) CHECK(std::abs(res.u.values[k] - b.values[k]) <= 1e-7);
}

TEST_CASE("fit failure names the matrix") {
  const auto g = disk(8);
  const GridFn zero = sample([](const Point&) { return 0.0; }, g);
  const SymMat a = SymMat::from_rows({{5, 4.9}, {4.9, 5}});
  const EllipticityPair wide{0.05, 10.0};
  DiscreteProblem p = problem(linear_operator(a, wide), g, zero);
  p.stencil = Stencil::axes(2);
  try {
    DiscreteOperator dop(p);
    FAIL("expected a fit failure");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("wider stencil") != std::string::npos);
  }
}

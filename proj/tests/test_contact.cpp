#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "pareg/contact.hpp"
#include "pareg/operators.hpp"

using namespace pareg;

namespace {

GridPtr ball(int n) { return make_grid(2, n, 1.0, Domain{DomainShape::ball, 1.0}); }

GridFn quadratic(const GridPtr& g, const SymMat& q, double bx = 0.0, double by = 0.0) {
  return sample([&](const Point& x) { return 0.5 * q.quad_form(std::span<const double>(x.data(), 2)) + bx * x[0] + by * x[1]; }, g);
}

}  // namespace

TEST_CASE("theta on quadratics and affine functions") {
  const auto g = ball(12);
  const GridFn u = quadratic(g, SymMat::from_rows({{1, 0}, {0, -1}}));
  const auto inner = g->region_mask(DomainShape::ball, 0.5);
  for (std::size_t k = 0; k < g->size(); ++k) {
    if (!inner[k]) continue;
    CHECK(theta_lower(u, k) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(theta_upper(u, k) == doctest::Approx(1.0).epsilon(1e-9));
  }
  const GridFn aff = sample([](const Point& x) { return 1.0 + 2.0 * x[0] - x[1]; }, g);
  CHECK(theta(aff, g->nearest_node({0.25, -0.25, 0})) <= 1e-9);
}

TEST_CASE("theta of |x| at the origin") {
  const auto g = ball(16);
  const GridFn u = sample([](const Point& x) { return std::hypot(x[0], x[1]); }, g);
  const std::size_t o = g->nearest_node({0, 0, 0});
  CHECK(theta_lower(u, o) <= 1e-9);
  CHECK(theta_upper(u, o) == doctest::Approx(2.0 / g->h()).epsilon(1e-9));
}

TEST_CASE("bisection agrees with the exact minimum") {
  const auto g = ball(8);
  CounterRng rng(4);
  const GridFn u = sample([&](const Point& x) { return std::sin(3 * x[0]) * std::cos(2 * x[1]) + x[0] * x[0] * x[1]; }, g);
  ContactOptions bis;
  bis.method = ContactMethod::bisection;
  bis.cap = 1e3;
  ContactOptions ex;
  ex.cap = 1e3;
  for (int t = 0; t < 6; ++t) {
    const auto& nodes = g->domain_nodes();
    const std::size_t k = nodes[rng.below(nodes.size())];
    CHECK(std::abs(theta_lower(u, k, bis) - theta_lower(u, k, ex)) <= bis.bisection_tol() * 1.01);
    CHECK(std::abs(psi(u, k, bis) - psi(u, k, ex)) <= bis.bisection_tol() * 1.01);
  }
}

TEST_CASE("the local warm-up window does not change the optimum") {
  const auto g = ball(24);
  const GridFn u = sample([](const Point& x) { return std::sin(4 * x[0] + x[1]) + std::abs(x[0] - 0.1) * x[1]; }, g);
  ContactOptions direct;
  direct.local_window = 0;
  ContactOptions narrow;
  narrow.local_window = 2;
  const ContactOptions wide;
  const ConstraintSet cs(u);
  CounterRng rng(9);
  for (int t = 0; t < 12; ++t) {
    const std::size_t pos = rng.below(cs.size());
    const double ref = theta_lower_at(cs, pos, direct);
    CHECK(theta_lower_at(cs, pos, narrow) == doctest::Approx(ref).epsilon(1e-9));
    CHECK(theta_lower_at(cs, pos, wide) == doctest::Approx(ref).epsilon(1e-9));
    const double pref = psi_at(cs, pos, direct);
    CHECK(psi_at(cs, pos, narrow) == doctest::Approx(pref).epsilon(1e-9));
    CHECK(psi_at(cs, pos, wide) == doctest::Approx(pref).epsilon(1e-9));
  }
}

TEST_CASE("constraint-set windows list nearby positions in order") {
  const auto g = ball(6);
  const ConstraintSet cs(sample([](const Point& x) { return x[0]; }, g));
  const std::size_t pos = cs.position(g->nearest_node({0, 0, 0}));
  std::vector<std::size_t> w;
  cs.window(pos, 1, w);
  CHECK(w.size() == 9);
  CHECK(std::is_sorted(w.begin(), w.end()));
  const std::size_t edge = cs.position(g->nearest_node({1, 0, 0}));
  cs.window(edge, 1, w);
  CHECK(w.size() == 4);  // the right neighbor is outside the box, its diagonals outside the ball
}

TEST_CASE("exact and bisection agree on a finer grid") {
  const auto g = ball(32);
  const GridFn u = sample([](const Point& x) { return 0.8 * std::sin(1.7 * x[0] - 1.1 * x[1] + 0.3) - 0.4 * std::cos(1.9 * x[1]); }, g);
  const ConstraintSet cs(u);
  ContactOptions bis;
  bis.method = ContactMethod::bisection;
  bis.cap = 50.0;
  bis.tol_A = 1e-6;
  CounterRng rng(21);
  std::vector<std::size_t> warm;
  for (int t = 0; t < 25; ++t) {
    const std::size_t pos = rng.below(cs.size());
    CHECK(std::abs(psi_at(cs, pos, {}, &warm) - psi_at(cs, pos, bis)) <= 2e-6);
    CHECK(std::abs(theta_lower_at(cs, pos, {}) - theta_lower_at(cs, pos, bis)) <= 2e-6);
  }
}

TEST_CASE("psi stays finite where the leading rows are degenerate") {
  // Trigonometric data and node for which a basis-first insertion order
  // once reported a spurious infeasibility.
  const auto g = ball(64);
  CounterRng rng(mix64(410));
  double amp[3], k1[3], k2[3], ph[3];
  for (int m = 0; m < 3; ++m) {
    amp[m] = rng.uniform(-1, 1);
    k1[m] = rng.uniform(-2, 2);
    k2[m] = rng.uniform(-2, 2);
    ph[m] = rng.uniform(0, 6.283185307179586);
  }
  const GridFn u = sample(
      [&](const Point& x) {
        double v = 0.0;
        for (int m = 0; m < 3; ++m) v += amp[m] * std::sin(k1[m] * x[0] + k2[m] * x[1] + ph[m]);
        return v;
      },
      g);
  const std::size_t node = g->nearest_node({-0.09375, 0.125, 0});
  CHECK(psi(u, node) == doctest::Approx(0.339867).epsilon(1e-5));
}

TEST_CASE("theta invariances") {
  const auto g = ball(10);
  const GridFn u = sample([](const Point& x) { return std::exp(x[0]) * std::sin(2 * x[1]); }, g);
  GridFn shifted = u;
  GridFn scaled = u;
  for (std::size_t k = 0; k < g->size(); ++k) {
    const Point x = g->coord(k);
    shifted.values[k] += 0.7 - 1.3 * x[0] + 2.1 * x[1];
    scaled.values[k] *= 3.0;
  }
  const auto inner = g->region_mask(DomainShape::ball, 0.5);
  const ConstraintSet cs(u);
  for (std::size_t k = 0; k < g->size(); ++k) {
    if (!inner[k]) continue;
    const double t = theta_lower(u, k);
    CHECK(theta_lower(shifted, k) == doctest::Approx(t).epsilon(1e-8));
    CHECK(theta_lower(scaled, k) == doctest::Approx(3 * t).epsilon(1e-8));
    CHECK(theta_upper(u, k) == theta_lower(negate(u), k));
    // A smaller constraint domain never increases the minimum opening.
    const ConstraintSet small(u, g->region_mask(DomainShape::ball, 0.75));
    CHECK(theta_lower_at(small, small.position(k), {}) <= t + 1e-9);
  }
}

TEST_CASE("theta agrees with the convex-envelope contact oracle") {
  const auto g = ball(8);
  const GridFn u = sample([](const Point& x) { return std::cos(3 * x[0] + 1) * x[1] + 0.3 * x[0] * x[0]; }, g);
  CounterRng rng(21);
  const auto& nodes = g->domain_nodes();
  for (int t = 0; t < 20; ++t) {
    const std::size_t k = nodes[rng.below(nodes.size())];
    const double a = theta_lower(u, k);
    const Point x = g->coord(k);
    auto contact_at = [&](double A) {
      GridFn w = u;
      for (std::size_t j : nodes) {
        const Point y = g->coord(j);
        w.values[j] += 0.5 * A * ((y[0] - x[0]) * (y[0] - x[0]) + (y[1] - x[1]) * (y[1] - x[1]));
      }
      return convex_envelope(w).contact[k] != 0;
    };
    CHECK(contact_at(a * (1 + 1e-6) + 1e-6));
    if (a > 1e-3) CHECK_FALSE(contact_at(a * (1 - 1e-3)));
  }
}

TEST_CASE("psi oracles") {
  const auto g = make_grid(2, 32, 1.0, Domain{DomainShape::cube, 1.0});
  const GridFn cube = sample([](const Point& x) { return x[0] * x[0] * x[0]; }, g);
  const std::size_t o = g->nearest_node({0, 0, 0});
  CHECK(std::abs(psi(cube, o) - 6.0) <= 5e-2);
  const auto b = ball(12);
  const GridFn q = quadratic(b, SymMat::from_rows({{2, 1}, {1, -3}}), 0.4, -1);
  const GridFn c = sample([](const Point& x) { return x[0] * x[0] * x[0] - x[0] * x[1] * x[1]; }, b);
  GridFn cq = c;
  for (std::size_t k = 0; k < b->size(); ++k) cq.values[k] += q.values[k];
  const auto inner = b->region_mask(DomainShape::ball, 0.4);
  for (std::size_t k = 0; k < b->size(); ++k) {
    if (!inner[k]) continue;
    CHECK(psi(q, k) <= 1e-6);
    CHECK(psi(cq, k) == doctest::Approx(psi(c, k)).epsilon(1e-6));
  }
}

TEST_CASE("psi bound via gradient for a cubic") {
  const auto g = make_grid(2, 16, 1.0, Domain{DomainShape::cube, 1.0});
  const GridFn u = sample([](const Point& x) { return x[0] * x[0] * x[0]; }, g);
  const std::size_t o = g->nearest_node({0, 0, 0});
  CHECK(psi_bound_via_gradient(u, o) == doctest::Approx(6.0).epsilon(1e-6));
  const GridFn q = quadratic(g, SymMat::from_rows({{2, 1}, {1, -3}}));
  CHECK(psi_bound_via_gradient(q, o) <= 1e-6);
}

TEST_CASE("curvature field of a harmonic quadratic and of zero") {
  const auto g = ball(12);
  const GridFn u = quadratic(g, SymMat::from_rows({{1, 0.5}, {0.5, -1}}));
  const double lam = std::sqrt(1.25);
  FieldOptions opt;
  opt.psi = true;
  const auto f = curvature_field(u, g->region_mask(DomainShape::ball, 0.5), opt);
  for (std::size_t k : f.inner_nodes()) {
    CHECK(f.theta[k] == doctest::Approx(lam).epsilon(1e-3));
    CHECK(f.psi[k] <= 1e-6);
  }
  const GridFn z = sample([](const Point&) { return 0.0; }, g);
  const auto fz = curvature_field(z, g->region_mask(DomainShape::ball, 0.5), opt);
  for (std::size_t k : fz.inner_nodes()) {
    CHECK(fz.theta[k] == 0.0);
    CHECK(fz.psi[k] == 0.0);
  }
}

TEST_CASE("curvature field does not depend on the thread count") {
  const auto g = ball(10);
  const GridFn u = sample([](const Point& x) { return std::sin(4 * x[0] * x[1]) + x[1]; }, g);
  FieldOptions a;
  a.psi = true;
  FieldOptions b = a;
  b.contact.threads = 3;
  const auto inner = g->region_mask(DomainShape::ball, 0.6);
  const auto fa = curvature_field(u, inner, a);
  const auto fb = curvature_field(u, inner, b);
  for (std::size_t k : fa.inner_nodes()) {
    CHECK(fa.theta[k] == fb.theta[k]);
    CHECK(fa.psi[k] == fb.psi[k]);
  }
}

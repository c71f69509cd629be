#include <cmath>
#include <cstdio>
#include <limits>

#include "doctest.h"
#include "pareg/grid.hpp"
#include "pareg/rng.hpp"

using namespace pareg;

namespace {

GridPtr cube_grid(int n, double L = 1.0) { return make_grid(2, n, L, Domain{DomainShape::cube, L}); }

// Minimum over convex combinations of at most three nodes: the convex
// envelope by Caratheodory, evaluated by brute force.
double brute_envelope(const GridFn& w, std::size_t at) {
  const Grid& g = *w.grid;
  const auto& nodes = g.domain_nodes();
  const Point x = g.coord(at);
  double best = w.values[at];
  const std::size_t m = nodes.size();
  for (std::size_t a = 0; a < m; ++a) {
    const Point pa = g.coord(nodes[a]);
    for (std::size_t b = a + 1; b < m; ++b) {
      const Point pb = g.coord(nodes[b]);
      // Segment.
      const double dx = pb[0] - pa[0];
      const double dy = pb[1] - pa[1];
      const double cross = dx * (x[1] - pa[1]) - dy * (x[0] - pa[0]);
      if (std::abs(cross) < 1e-12) {
        const double t = (dx * (x[0] - pa[0]) + dy * (x[1] - pa[1])) / (dx * dx + dy * dy);
        if (t >= -1e-12 && t <= 1 + 1e-12) best = std::min(best, (1 - t) * w.values[nodes[a]] + t * w.values[nodes[b]]);
      }
      for (std::size_t c = b + 1; c < m; ++c) {
        const Point pc = g.coord(nodes[c]);
        const double det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        if (std::abs(det) < 1e-12) continue;
        const double l1 = ((x[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (x[1] - pa[1])) / det;
        const double l2 = ((pb[0] - pa[0]) * (x[1] - pa[1]) - (x[0] - pa[0]) * (pb[1] - pa[1])) / det;
        const double l0 = 1 - l1 - l2;
        if (l0 < -1e-12 || l1 < -1e-12 || l2 < -1e-12) continue;
        best = std::min(best, l0 * w.values[nodes[a]] + l1 * w.values[nodes[b]] + l2 * w.values[nodes[c]]);
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("grid layout") {
  const auto g = cube_grid(1);
  CHECK(g->size() == 9);
  const GridFn x1 = sample([](const Point& x) { return x[0]; }, g);
  const std::vector<double> expect{-1, -1, -1, 0, 0, 0, 1, 1, 1};
  for (std::size_t k = 0; k < 9; ++k) CHECK(x1.values[k] == expect[k]);
  const GridFn zero = sample([](const Point&) { return 0.0; }, g);
  for (double v : zero.values) CHECK(v == 0.0);
  const auto b = make_grid(2, 8, 1.0, Domain{DomainShape::ball, 1.0});
  const double h = b->h();
  const GridFn r2 = sample([](const Point& x) { return x[0] * x[0] + x[1] * x[1]; }, b);
  CHECK(r2.values[b->linear_index({9, 9, 0})] == doctest::Approx(2 * h * h).epsilon(1e-14));
  CHECK(b->size() == 17u * 17u);
  for (std::size_t k = 0; k < b->size(); ++k) CHECK(b->multi_index(k) == b->multi_index(b->linear_index(b->multi_index(k))));
  CHECK_THROWS_AS(make_grid(2, 4, 1.0, Domain{DomainShape::ball, 1.5}), InputError);
  CHECK_THROWS_AS(sample([](const Point& x) { return 1.0 / x[0]; }, g), InputError);
}

TEST_CASE("finite differences") {
  const auto g = make_grid(2, 16, 1.0, Domain{DomainShape::ball, 1.0});
  const SymMat q = SymMat::from_rows({{1.5, -0.7}, {-0.7, 0.3}});
  const GridFn u = sample([&](const Point& x) { return 0.5 * q.quad_form(std::span<const double>(x.data(), 2)); }, g);
  const auto hess = fd_hessian(u);
  int interior = 0;
  for (std::size_t k = 0; k < g->size(); ++k) {
    if (!hess.valid[k]) continue;
    ++interior;
    CHECK((hess.values[k] - q).max_abs() <= 1e-11);
  }
  CHECK(interior > 0);
  const GridFn aff = sample([](const Point& x) { return 2.0 - 3.0 * x[0] + 0.5 * x[1]; }, g);
  const auto grad = fd_gradient(aff);
  for (std::size_t k = 0; k < g->size(); ++k) {
    CHECK(grad[0].values[k] == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(grad[1].values[k] == doctest::Approx(0.5).epsilon(1e-12));
  }
  const GridFn s = sample([](const Point& x) { return std::sin(x[0]); }, g);
  const auto gs = fd_gradient(s);
  const std::size_t origin = g->linear_index({16, 16, 0});
  const double h = g->h();
  CHECK(std::abs(gs[0].values[origin] - 1.0) <= h * h / 6 * (1 + 1e-9));
  CHECK_THROWS_AS(fd_gradient(sample([](const Point&) { return 0.0; }, cube_grid(1))), InputError);
}

TEST_CASE("convex envelope fixed cases") {
  const auto g = make_grid(2, 6, 1.0, Domain{DomainShape::ball, 1.0});
  const GridFn convex = sample([](const Point& x) { return 0.5 * (x[0] * x[0] + x[1] * x[1]); }, g);
  const auto e1 = convex_envelope(convex);
  for (std::size_t k : g->domain_nodes()) {
    CHECK(e1.envelope.values[k] == doctest::Approx(convex.values[k]).epsilon(1e-9));
    CHECK(e1.contact[k]);
  }
  const GridFn c = sample([](const Point&) { return 2.5; }, g);
  const auto e2 = convex_envelope(c);
  for (std::size_t k : g->domain_nodes()) {
    CHECK(e2.envelope.values[k] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(e2.contact[k]);
  }
}

TEST_CASE("concave data on a 5x5 cube matches the brute-force envelope") {
  const auto g = cube_grid(2);
  const GridFn w = sample([](const Point& x) { return -(x[0] * x[0] + x[1] * x[1]); }, g);
  const auto env = convex_envelope(w);
  for (std::size_t k : g->domain_nodes()) {
    CHECK(env.envelope.values[k] == doctest::Approx(brute_envelope(w, k)).epsilon(1e-9));
    const Index idx = g->multi_index(k);
    const bool corner = (idx[0] == 0 || idx[0] == 4) && (idx[1] == 0 || idx[1] == 4);
    CHECK(static_cast<bool>(env.contact[k]) == corner);
  }
}

TEST_CASE("envelope is below, midpoint convex and idempotent") {
  const auto g = make_grid(2, 8, 1.0, Domain{DomainShape::ball, 1.0});
  CounterRng rng(17);
  for (int trial = 0; trial < 3; ++trial) {
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2), c = rng.uniform(1, 4);
    const GridFn w = sample([&](const Point& x) { return std::sin(c * x[0] + a) * std::cos(c * x[1] - b) + a * x[0] * x[1]; }, g);
    const auto env = convex_envelope(w);
    const double tol = env.tol_contact;
    for (std::size_t k : g->domain_nodes()) {
      CHECK(env.envelope.values[k] <= w.values[k] + tol);
      for (int i = 0; i < 2; ++i) {
        Index e{};
        e[static_cast<std::size_t>(i)] = 1;
        Index me{};
        me[static_cast<std::size_t>(i)] = -1;
        const auto p = g->neighbor(k, e);
        const auto q = g->neighbor(k, me);
        if (p && q && g->in_domain(*p) && g->in_domain(*q)) {
          CHECK(env.envelope.values[k] <= 0.5 * (env.envelope.values[*p] + env.envelope.values[*q]) + tol);
        }
      }
    }
    const auto twice = convex_envelope(env.envelope);
    for (std::size_t k : g->domain_nodes()) {
      CHECK(twice.envelope.values[k] == doctest::Approx(env.envelope.values[k]).epsilon(1e-9));
    }
  }
}

TEST_CASE("ABP checker") {
  const double R = 0.5;
  const EllipticityPair ell{1.0, 2.0};
  auto run = [&](int n, double c, double scale) {
    const auto g = make_grid(2, n, 2 * R, Domain{DomainShape::ball, 2 * R});
    const GridFn u = sample([&](const Point& x) { return scale * c * (x[0] * x[0] + x[1] * x[1] - R * R); }, g);
    const GridFn f = sample([&](const Point&) { return scale * (-2.0 * ell.lambda * c * 2); }, g);
    return abp_check(u, f, R);
  };
  const auto a32 = run(32, 1.0, 1.0);
  const auto a64 = run(64, 1.0, 1.0);
  CHECK(std::isfinite(a32.constant));
  CHECK(std::abs(a64.constant / a32.constant - 1.0) <= 0.1);
  CHECK(run(32, 1.0, 2.0).constant == a32.constant);
  const auto g = make_grid(2, 16, 1.0, Domain{DomainShape::ball, 1.0});
  const GridFn pos = sample([](const Point& x) { return 1.0 + x[0] * x[0]; }, g);
  CHECK(abp_check(pos, pos, 0.5).constant == 0.0);
}

TEST_CASE("CSV round trip") {
  const auto g = make_grid(2, 4, 1.0, Domain{DomainShape::ball, 1.0});
  const GridFn u = sample([](const Point& x) { return std::exp(x[0]) / 3.0 + x[1]; }, g);
  const std::string path = "test_grid_roundtrip.csv";
  write_gridfn_csv(path, u);
  const GridFn v = read_gridfn_csv(path, g);
  for (std::size_t k : g->domain_nodes()) CHECK(v.values[k] == u.values[k]);
  std::remove(path.c_str());
}

#include <cmath>
#include <limits>

#include "doctest.h"
#include "pareg/analysis.hpp"

using namespace pareg;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> power_law(std::size_t n, double eps, double t0, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = t0 * std::pow(1.0 - rng.uniform(), -1.0 / eps);
  return v;
}

GridPtr disk(int n) { return make_grid(2, n, 1.0, Domain{DomainShape::ball, 1.0}); }

CurvatureField psi_field(const GridPtr& g, double value) {
  CurvatureField f;
  f.grid = g;
  f.inner = g->region_mask(DomainShape::ball, 0.5);
  f.psi.assign(g->size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < g->size(); ++k) {
    if (f.inner[k]) f.psi[k] = value;
  }
  return f;
}

}  // namespace

TEST_CASE("line fit") {
  const std::vector<double> x{0, 1, 2, 3};
  const std::vector<double> y{1, 3, 5, 7};
  const auto [s, c] = fit_line(x, y);
  CHECK(s == doctest::Approx(2.0));
  CHECK(c == doctest::Approx(1.0));
}

TEST_CASE("tail fit") {
  const std::vector<double> zeros(1000, 0.0);
  CHECK(tail_fit(zeros, 1.0).bounded);
  CHECK(std::isinf(tail_fit(zeros, 0.0).epsilon_hat));
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto v = power_law(100000, 0.5, 1.0, seed);
    const TailFit f = tail_fit(v, 1.0);
    CHECK(f.epsilon_hat == doctest::Approx(0.5).epsilon(0.04));
    CHECK(f.points >= 5);
    CHECK(f.t_max / f.t_min >= 10.0);
  }
  const auto v = power_law(100000, 1.5, 1.0, 9);
  CHECK(tail_fit(v, 1.0).epsilon_hat == doctest::Approx(1.5).epsilon(0.04));
  const std::vector<double> capped(500, kInf);
  CHECK_THROWS_AS(tail_fit(capped, 1.0), InsufficientTail);
  try {
    tail_fit(capped, 1.0);
  } catch (const InsufficientTail& e) {
    CHECK(!e.curve().t.empty());
  }
  // Bounded fields: the survival reaches zero within a decade.
  std::vector<double> bounded;
  for (int i = 0; i < 2000; ++i) bounded.push_back(1.0 + 3.0 * i / 2000.0);
  CHECK(tail_fit(bounded, 1.0).bounded);
}

TEST_CASE("measure decay") {
  const std::vector<double> zeros(100, 0.0);
  const std::vector<double> ts{1, 2, 4, 8};
  CHECK(measure_decay_check(zeros, 2.0, 0.5, ts).all_pass);
  const auto v = power_law(200000, 0.5, 1.0, 4);
  const std::vector<double> tl{1, 2, 4, 8, 16, 32};
  // M^eps = 2 >= 1/(1 - sigma) for sigma below 1/2.
  CHECK(measure_decay_check(v, 4.0, 0.45, tl).all_pass);
  CHECK_FALSE(measure_decay_check(v, 2.0, 0.5, tl).all_pass);
  const auto rep = measure_decay_check(v, 4.0, 0.45, tl);
  for (std::size_t i = 0; i < rep.frontier_M.size(); ++i) {
    CHECK(rep.frontier_sigma[i] == doctest::Approx(1.0 - std::pow(rep.frontier_M[i], -0.5)).epsilon(0.05));
  }
  CHECK_THROWS_AS(measure_decay_check(std::vector<double>{}, 2.0, 0.5, ts), InputError);
}

TEST_CASE("CZ decomposition checker") {
  const int side = 16;
  CubeMask none{2, side, std::vector<std::uint8_t>(side * side, 0)};
  CubeMask full{2, side, std::vector<std::uint8_t>(side * side, 1)};
  const auto empty = cz_check(none, full, 0.3);
  CHECK(empty.hypotheses_hold);
  CHECK(empty.conclusion);
  const auto r = cz_check(full, full, 0.5);
  CHECK_FALSE(r.hypotheses_hold);
  CHECK(r.failed_hypothesis == "|D| <= delta |Q_1|");
  CHECK_THROWS_AS(cz_check(full, none, 0.5), InputError);
  // One dense node whose neighborhood leaves E violates the dilation property.
  CubeMask d1 = none;
  CubeMask e1 = none;
  d1.bits[5 * side + 5] = 1;
  e1.bits[5 * side + 5] = 1;
  const auto dil = cz_check(d1, e1, 0.3);
  CHECK_FALSE(dil.hypotheses_hold);
  CHECK(dil.failed_hypothesis.rfind("dilation", 0) == 0);
  CounterRng rng(17);
  for (int t = 0; t < 300; ++t) {
    const double delta = rng.uniform(0.05, 0.6);
    const auto [D, E] = cz_instance(t % 3 == 0 ? 3 : 2, t % 3 == 0 ? 8 : 32, delta, rng);
    const auto res = cz_check(D, E, delta);
    CHECK(res.hypotheses_hold);
    CHECK(res.conclusion);
  }
}

TEST_CASE("flatness correction") {
  CounterRng rng(5);
  const EllipticityPair ell{1.0, 3.0};
  const Operator ops[] = {pucci_operator(2, ell, PucciSign::plus), pucci_operator(2, ell, PucciSign::minus),
                          linear_operator(SymMat::from_rows({{2, 0.5}, {0.5, 1.5}}), ell)};
  for (const auto& op : ops) {
    for (int t = 0; t < 30; ++t) {
      const SymMat c = random_symmat(2, 5.0, rng);
      const auto [a, res] = flatness_correction(op, c);
      CHECK(res <= 1e-10);
      CHECK(std::abs(a) <= std::abs(op(c)) / (2.0 * ell.lambda * 2) * (1 + 1e-9));
    }
  }
}

TEST_CASE("flatness iteration") {
  const auto g = disk(96);
  const Operator lap = linear_operator(SymMat::identity(2), EllipticityPair{1, 1});
  const GridFn quad = sample([](const Point& x) { return 0.05 * (x[0] * x[0] - x[1] * x[1]) + 0.02 * x[0] * x[1] + 0.01 * x[1]; }, g);
  const FlatnessTrace tq = flatness_iterate(quad, lap);
  REQUIRE(tq.scales.size() >= 2);
  for (std::size_t k = 1; k < tq.scales.size(); ++k) CHECK(tq.scales[k].error <= 1e-13);
  const GridFn cubic = sample([](const Point& x) { return 0.1 * (x[0] * x[0] * x[0] - 3 * x[0] * x[1] * x[1]); }, g);
  FlatnessOptions opt;
  opt.ratio_slack = 1.1;
  const FlatnessTrace tc = flatness_iterate(cubic, lap, opt);
  CHECK(tc.hypothesis_met);
  CHECK(tc.contracts);
  CHECK(tc.truncated);
  CHECK(tc.scales.size() >= 4);
  for (const auto& s : tc.scales) {
    CHECK(s.correction_residual <= 1e-10);
    if (s.k > 0) CHECK(s.ratio <= tc.target * 1.1);
  }
  GridFn big = cubic;
  for (double& v : big.values) v *= 100.0;
  const FlatnessTrace tb = flatness_iterate(big, lap);
  CHECK_FALSE(tb.hypothesis_met);
  CHECK_FALSE(tb.warnings.empty());
}

TEST_CASE("calibration") {
  const Operator lap = linear_operator(SymMat::identity(2), EllipticityPair{1, 1});
  CHECK_THROWS_AS(calibrate_constants({lap}, 0, 1), InputError);
  CalibrationOptions opt;
  opt.n = 32;
  const auto res = calibrate_constants({lap}, 2, 1, opt);
  CHECK(res.delta0_hat > 0.0);
  CHECK(res.delta_alpha_hat == doctest::Approx(res.delta0_hat / 3.0));
}

TEST_CASE("singular set flags") {
  const auto g = disk(80);
  const double r = 0.05;
  const auto zero = flag_singular(psi_field(g, 0.0), r, 0.01);
  CHECK(zero.flagged_count == 0);
  CHECK(zero.box_dimension == 0.0);
  const auto all = flag_singular(psi_field(g, kInf), r, 0.01);
  std::size_t inner = 0;
  for (auto b : psi_field(g, 0.0).inner) inner += b;
  CHECK(all.flagged_count == inner);
  for (std::size_t j = 1; j < all.counts.size(); ++j) CHECK(all.counts[j] <= all.counts[j - 1]);
  // A graded field: larger thresholds certify more nodes.
  CurvatureField f = psi_field(g, 0.0);
  for (std::size_t k = 0; k < g->size(); ++k) {
    if (f.inner[k]) f.psi[k] = 1.0 / (1e-3 + g->norm(k));
  }
  std::size_t prev = g->size();
  for (double da : {0.01, 0.05, 0.1, 0.5, 1.0}) {
    const auto rep = flag_singular(f, r, da);
    CHECK(rep.flagged_count <= prev);
    prev = rep.flagged_count;
  }
  CHECK_THROWS_AS(flag_singular(f, 0.07, 0.1), InputError);
  CHECK_THROWS_AS(flag_singular(f, 0.02, 0.1), InputError);
}

TEST_CASE("box dimension") {
  const auto g = make_grid(2, 64, 1.0, Domain{DomainShape::cube, 1.0});
  const std::vector<double> scales{4 * g->h(), 8 * g->h(), 16 * g->h(), 32 * g->h()};
  std::vector<std::uint8_t> one(g->size(), 0);
  one[g->nearest_node({0.1, 0.2, 0})] = 1;
  CHECK(box_dimension(*g, one, scales).dim_hat == doctest::Approx(0.0));
  std::vector<std::uint8_t> all(g->size(), 1);
  CHECK(box_dimension(*g, all, scales).dim_hat == doctest::Approx(2.0).epsilon(0.1));
  std::vector<std::uint8_t> line(g->size(), 0);
  for (std::size_t k = 0; k < g->size(); ++k) line[k] = g->multi_index(k)[1] == 64 ? 1 : 0;
  CHECK(box_dimension(*g, line, scales).dim_hat == doctest::Approx(1.0).epsilon(0.1));
  std::vector<std::uint8_t> empty(g->size(), 0);
  const auto e = box_dimension(*g, empty, scales);
  CHECK(e.dim_hat == 0.0);
  CHECK(e.counts == std::vector<std::size_t>(4, 0));
  // Grid-aligned translations preserve every count.
  CounterRng rng(3);
  std::vector<std::uint8_t> blob(g->size(), 0);
  for (int i = 0; i < 200; ++i) blob[g->linear_index({static_cast<int>(rng.below(40)), static_cast<int>(rng.below(40)), 0})] = 1;
  std::vector<std::uint8_t> moved(g->size(), 0);
  for (std::size_t k = 0; k < g->size(); ++k) {
    if (!blob[k]) continue;
    const Index i = g->multi_index(k);
    moved[g->linear_index({i[0] + 37, i[1] + 53, 0})] = 1;
  }
  CHECK(box_dimension(*g, blob, scales).counts == box_dimension(*g, moved, scales).counts);
  CHECK_THROWS_AS(box_dimension(*g, one, std::vector<double>{g->h(), 4 * g->h(), 8 * g->h()}), InputError);
}

#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "pareg/operators.hpp"
#include "pareg/symmat.hpp"

using namespace pareg;

namespace {
const EllipticityPair kEll{1.0, 2.0};
}

TEST_CASE("eigenvalues of fixed matrices") {
  const auto e1 = eigenvalues(SymMat::from_rows({{1, 0}, {0, -1}}));
  CHECK(e1[0] == -1.0);
  CHECK(e1[1] == 1.0);
  const auto e0 = eigenvalues(SymMat(2));
  CHECK(e0[0] == 0.0);
  CHECK(e0[1] == 0.0);
  const auto e2 = eigenvalues(SymMat::from_rows({{2, 1}, {1, 2}}));
  CHECK(e2[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(e2[1] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("eigenvalues agree with a dense solver and reconstruct") {
  CounterRng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 7;
    const SymMat m = random_symmat(d, trial % 2 ? 10.0 : 1.0, rng);
    const auto s = eigen_decompose(m);
    Eigen::MatrixXd dense(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) dense(i, j) = m(i, j);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
    for (int i = 0; i < d; ++i) CHECK(std::abs(s.values[i] - es.eigenvalues()(i)) <= 1e-12 * (1 + m.frobenius_norm()));
    CHECK((reconstruct(s) - m).frobenius_norm() <= 1e-12 * (1 + m.frobenius_norm()));
    for (int i = 1; i < d; ++i) CHECK(s.values[i - 1] <= s.values[i]);
  }
}

TEST_CASE("non-finite input is rejected") {
  SymMat m(2);
  m.set(0, 1, std::nan(""));
  CHECK_THROWS_AS(eigenvalues(m), InputError);
}

TEST_CASE("pucci fixed values") {
  CHECK(pucci(SymMat(2), kEll, PucciSign::plus) == 0.0);
  const SymMat m = SymMat::from_rows({{1, 0}, {0, -1}});
  CHECK(pucci(m, kEll, PucciSign::plus) == doctest::Approx(1.0));
  CHECK(pucci(m, kEll, PucciSign::minus) == doctest::Approx(-1.0));
  CHECK(pucci(SymMat::identity(2), kEll, PucciSign::plus) == doctest::Approx(-2.0));
}

TEST_CASE("pucci invariants on samples") {
  CounterRng rng(5);
  for (int t = 0; t < 500; ++t) {
    const int d = 2 + t % 3;
    const SymMat m = random_symmat(d, 3.0, rng);
    const SymMat n = random_symmat(d, 3.0, rng);
    const double pm = pucci(m, kEll, PucciSign::plus);
    CHECK(pucci(m, kEll, PucciSign::minus) == doctest::Approx(-pucci(-m, kEll, PucciSign::plus)).epsilon(1e-12));
    const double s = rng.uniform(0.0, 5.0);
    CHECK(pucci(s * m, kEll, PucciSign::plus) == doctest::Approx(s * pm).epsilon(1e-12));
    CHECK(pucci(m + n, kEll, PucciSign::plus) <= pm + pucci(n, kEll, PucciSign::plus) + 1e-12);
    CHECK(pucci(m + n, kEll, PucciSign::minus) >=
          pucci(m, kEll, PucciSign::minus) + pucci(n, kEll, PucciSign::minus) - 1e-12);
    const EllipticityPair iso{1.5, 1.5};
    CHECK(pucci(m, iso, PucciSign::plus) == doctest::Approx(-1.5 * m.trace()).epsilon(1e-13));
    const SymMat a = pucci_extremal_matrix(m, kEll, PucciSign::plus);
    CHECK(-inner(a, m) == doctest::Approx(pm).epsilon(1e-12));
  }
}

TEST_CASE("pucci brute force stays below the closed form") {
  const SymMat m = SymMat::from_rows({{1, 0}, {0, -1}});
  const double b = pucci_brute(m, kEll, 10000, 3);
  CHECK(b <= 1.0 + 1e-15);
  CHECK(b >= 1.0 - 1e-3);
  CHECK(pucci_brute(SymMat(2), kEll, 10, 1) == 0.0);
  const EllipticityPair iso{2.0, 2.0};
  const SymMat q = SymMat::from_rows({{1, 0.5}, {0.5, 3}});
  CHECK(pucci_brute(q, iso, 7, 2) == -2.0 * q.trace());
  CounterRng rng(9);
  for (int t = 0; t < 20; ++t) {
    const SymMat r = random_symmat(3, 2.0, rng);
    CHECK(pucci_brute(r, kEll, 200, t) <= pucci(r, kEll, PucciSign::plus) + 1e-12);
  }
}

TEST_CASE("ellipticity validation") {
  CHECK_THROWS_AS((EllipticityPair{0.0, 1.0}.validate()), InputError);
  CHECK_THROWS_AS((EllipticityPair{2.0, 1.0}.validate()), InputError);
  CHECK_NOTHROW((EllipticityPair{1.0, 1.0}.validate()));
}

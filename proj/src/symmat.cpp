#include "pareg/symmat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pareg/rng.hpp"

namespace pareg {

SymMat::SymMat(int dim) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw InputError("SymMat: dimension " + std::to_string(dim) + " outside 1.." +
                     std::to_string(kMaxDim));
  }
}

SymMat SymMat::identity(int dim, double scale) {
  SymMat m(dim);
  for (int i = 0; i < dim; ++i) m.set(i, i, scale);
  return m;
}

SymMat SymMat::diagonal(std::span<const double> diag) {
  SymMat m(static_cast<int>(diag.size()));
  for (int i = 0; i < m.dim(); ++i) m.set(i, i, diag[static_cast<std::size_t>(i)]);
  return m;
}

SymMat SymMat::from_dense(int dim, std::span<const double> row_major) {
  if (row_major.size() != static_cast<std::size_t>(dim * dim)) {
    throw InputError("SymMat::from_dense: expected " + std::to_string(dim * dim) + " entries");
  }
  SymMat m(dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      const double a = row_major[static_cast<std::size_t>(i * dim + j)];
      const double b = row_major[static_cast<std::size_t>(j * dim + i)];
      m.set(i, j, 0.5 * (a + b));
    }
  }
  if (!m.is_finite()) throw InputError("SymMat: non-finite entry");
  return m;
}

SymMat SymMat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int dim = static_cast<int>(rows.size());
  std::vector<double> dense;
  dense.reserve(static_cast<std::size_t>(dim * dim));
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != dim) throw InputError("SymMat::from_rows: not square");
    dense.insert(dense.end(), r.begin(), r.end());
  }
  return from_dense(dim, dense);
}

SymMat SymMat::projector(std::span<const double> e) {
  const int dim = static_cast<int>(e.size());
  double n2 = 0.0;
  for (double v : e) n2 += v * v;
  if (n2 <= 0.0) throw InputError("SymMat::projector: zero vector");
  SymMat m(dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      m.set(i, j, e[static_cast<std::size_t>(i)] * e[static_cast<std::size_t>(j)] / n2);
    }
  }
  return m;
}

double SymMat::trace() const {
  double t = 0.0;
  for (int i = 0; i < dim_; ++i) t += (*this)(i, i);
  return t;
}

double SymMat::frobenius_norm() const { return std::sqrt(inner(*this, *this)); }

double SymMat::max_abs() const {
  double m = 0.0;
  for (double v : packed()) m = std::max(m, std::abs(v));
  return m;
}

bool SymMat::is_finite() const {
  return std::all_of(packed().begin(), packed().end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> SymMat::to_dense() const {
  std::vector<double> d(static_cast<std::size_t>(dim_ * dim_));
  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j < dim_; ++j) d[static_cast<std::size_t>(i * dim_ + j)] = (*this)(i, j);
  }
  return d;
}

double SymMat::quad_form(std::span<const double> x) const {
  double s = 0.0;
  for (int i = 0; i < dim_; ++i) {
    const double xi = x[static_cast<std::size_t>(i)];
    s += (*this)(i, i) * xi * xi;
    for (int j = i + 1; j < dim_; ++j) s += 2.0 * (*this)(i, j) * xi * x[static_cast<std::size_t>(j)];
  }
  return s;
}

SymMat& SymMat::operator+=(const SymMat& o) {
  if (o.dim_ != dim_) throw InputError("SymMat: dimension mismatch");
  for (std::size_t k = 0; k < packed_size(); ++k) a_[k] += o.a_[k];
  return *this;
}

SymMat& SymMat::operator-=(const SymMat& o) {
  if (o.dim_ != dim_) throw InputError("SymMat: dimension mismatch");
  for (std::size_t k = 0; k < packed_size(); ++k) a_[k] -= o.a_[k];
  return *this;
}

SymMat& SymMat::operator*=(double s) {
  for (std::size_t k = 0; k < packed_size(); ++k) a_[k] *= s;
  return *this;
}

bool operator==(const SymMat& a, const SymMat& b) {
  if (a.dim_ != b.dim_) return false;
  return std::equal(a.packed().begin(), a.packed().end(), b.packed().begin());
}

double inner(const SymMat& a, const SymMat& b) {
  if (a.dim() != b.dim()) throw InputError("inner: dimension mismatch");
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    s += a(i, i) * b(i, i);
    for (int j = i + 1; j < a.dim(); ++j) s += 2.0 * a(i, j) * b(i, j);
  }
  return s;
}

SpectralDecomposition eigen_decompose(const SymMat& m) {
  if (!m.is_finite()) throw InputError("eigenvalues: non-finite matrix entry");
  const int n = m.dim();
  std::vector<double> a = m.to_dense();
  std::vector<double> v(static_cast<std::size_t>(n * n), 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i * n + i)] = 1.0;
  auto A = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i * n + j)]; };
  auto V = [&](int i, int j) -> double& { return v[static_cast<std::size_t>(i * n + j)]; };

  const double scale = std::max(m.frobenius_norm(), std::numeric_limits<double>::min());
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (std::sqrt(off) <= 1e-17 * scale) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = A(k, p);
          const double akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = A(p, k);
          const double aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        A(p, q) = 0.0;
        A(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          const double vkp = V(k, p);
          const double vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return A(x, x) < A(y, y); });

  SpectralDecomposition out;
  out.dim = n;
  out.values.resize(static_cast<std::size_t>(n));
  out.vectors.resize(static_cast<std::size_t>(n * n));
  for (int k = 0; k < n; ++k) {
    const int src = order[static_cast<std::size_t>(k)];
    out.values[static_cast<std::size_t>(k)] = A(src, src);
    for (int r = 0; r < n; ++r) out.vectors[static_cast<std::size_t>(k * n + r)] = V(r, src);
  }
  return out;
}

std::vector<double> eigenvalues(const SymMat& m) { return eigen_decompose(m).values; }

SymMat reconstruct(const SpectralDecomposition& s) {
  SymMat m(s.dim);
  for (int i = 0; i < s.dim; ++i) {
    for (int j = i; j < s.dim; ++j) {
      double v = 0.0;
      for (int k = 0; k < s.dim; ++k) v += s.vec(i, k) * s.values[static_cast<std::size_t>(k)] * s.vec(j, k);
      m.set(i, j, v);
    }
  }
  return m;
}

void EllipticityPair::validate() const {
  if (!(lambda > 0.0) || !(Lambda >= lambda) || !std::isfinite(Lambda)) {
    throw InputError("ellipticity pair must satisfy 0 < lambda <= Lambda (got lambda=" +
                     std::to_string(lambda) + ", Lambda=" + std::to_string(Lambda) + ")");
  }
}

double pucci(const SymMat& m, const EllipticityPair& ell, PucciSign sign) {
  ell.validate();
  const auto e = eigenvalues(m);
  double neg = 0.0;
  double pos = 0.0;
  for (double v : e) {
    if (v < 0.0) neg += -v;
    else pos += v;
  }
  if (sign == PucciSign::plus) return ell.Lambda * neg - ell.lambda * pos;
  return ell.lambda * neg - ell.Lambda * pos;
}

SymMat pucci_extremal_matrix(const SymMat& m, const EllipticityPair& ell, PucciSign sign) {
  ell.validate();
  const auto s = eigen_decompose(m);
  const int n = m.dim();
  std::vector<double> a(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const bool negative = s.values[static_cast<std::size_t>(k)] < 0.0;
    const bool big = (sign == PucciSign::plus) ? negative : !negative;
    a[static_cast<std::size_t>(k)] = big ? ell.Lambda : ell.lambda;
  }
  SpectralDecomposition t = s;
  t.values = a;
  return reconstruct(t);
}

namespace {

// Haar-distributed orthogonal matrix (rows), via Gram-Schmidt on Gaussians.
std::vector<double> random_rotation(int n, CounterRng& rng) {
  std::vector<double> r(static_cast<std::size_t>(n * n));
  if (n == 2) {
    const double th = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    r = {std::cos(th), std::sin(th), -std::sin(th), std::cos(th)};
    return r;
  }
  for (int i = 0; i < n; ++i) {
    for (;;) {
      for (int k = 0; k < n; ++k) r[static_cast<std::size_t>(i * n + k)] = rng.normal();
      for (int j = 0; j < i; ++j) {
        double d = 0.0;
        for (int k = 0; k < n; ++k) d += r[static_cast<std::size_t>(i * n + k)] * r[static_cast<std::size_t>(j * n + k)];
        for (int k = 0; k < n; ++k) r[static_cast<std::size_t>(i * n + k)] -= d * r[static_cast<std::size_t>(j * n + k)];
      }
      double nn = 0.0;
      for (int k = 0; k < n; ++k) nn += r[static_cast<std::size_t>(i * n + k)] * r[static_cast<std::size_t>(i * n + k)];
      if (nn > 1e-20) {
        nn = std::sqrt(nn);
        for (int k = 0; k < n; ++k) r[static_cast<std::size_t>(i * n + k)] /= nn;
        break;
      }
    }
  }
  return r;
}

}  // namespace

double pucci_brute(const SymMat& m, const EllipticityPair& ell, int n_samples, std::uint64_t seed) {
  ell.validate();
  if (n_samples < 1) throw InputError("pucci_brute: n_samples must be >= 1");
  if (!m.is_finite()) throw InputError("pucci_brute: non-finite matrix entry");
  // The admissible set collapses to {lambda I}.
  if (ell.lambda == ell.Lambda) return -ell.lambda * m.trace();

  const int n = m.dim();
  CounterRng rng(seed);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> row(static_cast<std::size_t>(n));
  for (int s = 0; s < n_samples; ++s) {
    const auto r = random_rotation(n, rng);
    // For a fixed frame the best a_i in {lambda, Lambda} is chosen per axis.
    double val = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) row[static_cast<std::size_t>(k)] = r[static_cast<std::size_t>(i * n + k)];
      const double di = m.quad_form(row);
      val += std::max(-ell.lambda * di, -ell.Lambda * di);
    }
    best = std::max(best, val);
  }
  return best;
}

std::string to_string(const SymMat& m) {
  std::ostringstream os;
  os << '[';
  for (int i = 0; i < m.dim(); ++i) {
    os << (i ? ", [" : "[");
    for (int j = 0; j < m.dim(); ++j) os << (j ? ", " : "") << m(i, j);
    os << ']';
  }
  os << ']';
  return os.str();
}

}  // namespace pareg

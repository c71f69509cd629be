#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pareg {

/// Raised for invalid user input (bad parameters, malformed configs).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure fails (divergence, non-convergence).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxDim = 8;

/// Small dense symmetric matrix, stored as the packed upper triangle
/// (row-major). Supports dimensions 2..8.
class SymMat {
 public:
  SymMat() = default;
  explicit SymMat(int dim);

  static SymMat identity(int dim, double scale = 1.0);
  static SymMat diagonal(std::span<const double> diag);
  /// Symmetrizes a row-major dense matrix as (M + M^T)/2.
  static SymMat from_dense(int dim, std::span<const double> row_major);
  static SymMat from_rows(std::initializer_list<std::initializer_list<double>> rows);
  /// e e^T / |e|^2 for a nonzero vector e.
  static SymMat projector(std::span<const double> e);

  int dim() const { return dim_; }
  std::size_t packed_size() const { return static_cast<std::size_t>(dim_ * (dim_ + 1) / 2); }
  std::span<const double> packed() const { return {a_.data(), packed_size()}; }
  std::span<double> packed() { return {a_.data(), packed_size()}; }

  double operator()(int i, int j) const { return a_[index(i, j)]; }
  void set(int i, int j, double v) { a_[index(i, j)] = v; }

  double trace() const;
  double frobenius_norm() const;
  double max_abs() const;
  bool is_finite() const;
  std::vector<double> to_dense() const;
  /// x^T M x.
  double quad_form(std::span<const double> x) const;

  SymMat& operator+=(const SymMat& o);
  SymMat& operator-=(const SymMat& o);
  SymMat& operator*=(double s);
  friend SymMat operator+(SymMat a, const SymMat& b) { return a += b; }
  friend SymMat operator-(SymMat a, const SymMat& b) { return a -= b; }
  friend SymMat operator*(SymMat a, double s) { return a *= s; }
  friend SymMat operator*(double s, SymMat a) { return a *= s; }
  friend SymMat operator-(SymMat a) { return a *= -1.0; }
  friend bool operator==(const SymMat& a, const SymMat& b);

 private:
  std::size_t index(int i, int j) const {
    if (i > j) std::swap(i, j);
    return static_cast<std::size_t>(i * dim_ - i * (i - 1) / 2 + (j - i));
  }

  int dim_ = 0;
  std::array<double, kMaxDim*(kMaxDim + 1) / 2> a_{};
};

/// Frobenius inner product tr(A B).
double inner(const SymMat& a, const SymMat& b);

struct SpectralDecomposition {
  std::vector<double> values;   // ascending
  std::vector<double> vectors;  // column-major, column k pairs with values[k]
  int dim = 0;

  double vec(int row, int col) const { return vectors[static_cast<std::size_t>(col * dim + row)]; }
};

/// Cyclic Jacobi rotations. Eigenvalues sorted ascending, ties kept in
/// their original diagonal order.
SpectralDecomposition eigen_decompose(const SymMat& m);
std::vector<double> eigenvalues(const SymMat& m);

/// Rebuilds V diag(values) V^T.
SymMat reconstruct(const SpectralDecomposition& s);

struct EllipticityPair {
  double lambda = 1.0;
  double Lambda = 1.0;

  void validate() const;
  double ratio() const { return Lambda / lambda; }
};

enum class PucciSign { plus, minus };

/// Closed form of sup / inf over lambda I <= A <= Lambda I of -tr(A M).
double pucci(const SymMat& m, const EllipticityPair& ell, PucciSign sign);

/// The admissible A attaining the extremum in pucci().
SymMat pucci_extremal_matrix(const SymMat& m, const EllipticityPair& ell, PucciSign sign);

/// Direct sup of -tr(A M) over sampled admissible A = R^T diag(a) R.
/// Never exceeds pucci(m, ell, plus).
double pucci_brute(const SymMat& m, const EllipticityPair& ell, int n_samples, std::uint64_t seed);

std::string to_string(const SymMat& m);

}  // namespace pareg

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pareg/rng.hpp"
#include "pareg/symmat.hpp"

namespace pareg {

/// Matrices A_{ab} of an inf-sup (Bellman-Isaacs) operator, stored with the
/// sup index fastest: matrices[a * n_sup + b].
struct IsaacsFamily {
  int n_inf = 1;
  int n_sup = 1;
  std::vector<SymMat> matrices;

  const SymMat& at(int a, int b) const { return matrices[static_cast<std::size_t>(a * n_sup + b)]; }
  int dim() const { return matrices.empty() ? 0 : matrices.front().dim(); }
  /// Throws InputError unless every member has spectrum in [lambda, Lambda].
  void validate(const EllipticityPair& ell) const;
};

enum class OperatorKind { linear, pucci_plus, pucci_minus, isaacs, isaacs_smoothed };

std::string to_string(OperatorKind k);

/// Combines member values h_{ab} = -tr(A_{ab} M) by min over a of max over b,
/// or by the log-sum-exp relaxation when tau is set. When `weights` is
/// non-empty it receives dF/dh_{ab} (a probability vector).
double combine_inf_sup(std::span<const double> h, int n_inf, int n_sup, std::optional<double> tau,
                       std::span<double> weights = {});

/// An elliptic nonlinearity F(M) together with its ellipticity pair and,
/// where one exists, its derivative DF (as a symmetric matrix paired with
/// increments through the Frobenius product). Immutable.
class Operator {
 public:
  int dim() const { return dim_; }
  OperatorKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const EllipticityPair& ellipticity() const { return ell_; }

  double operator()(const SymMat& m) const;

  bool has_derivative() const { return kind_ != OperatorKind::isaacs; }
  /// Throws InputError("derivative unavailable") for exact Isaacs operators.
  SymMat derivative(const SymMat& m) const;
  std::optional<double> df_lipschitz_bound() const { return df_lipschitz_; }

  /// Member matrices for linear and (smoothed) Isaacs operators. Pucci
  /// operators have no fixed family; the solver builds one from a stencil.
  const std::optional<IsaacsFamily>& family() const { return family_; }
  std::optional<double> tau() const { return tau_; }
  /// Accumulated translation: this operator evaluates F0(M + shift()).
  const SymMat& shift() const { return shift_; }

  /// F~(N) = F(N + m0).
  Operator translated(const SymMat& m0) const;

  friend Operator linear_operator(const SymMat& a, const EllipticityPair& ell);
  friend Operator pucci_operator(int dim, const EllipticityPair& ell, PucciSign sign);
  friend Operator isaacs_exact(IsaacsFamily fam, const EllipticityPair& ell);
  friend Operator isaacs_smoothed(IsaacsFamily fam, const EllipticityPair& ell, double tau);

 private:
  Operator() = default;

  OperatorKind kind_ = OperatorKind::linear;
  std::string name_;
  int dim_ = 0;
  EllipticityPair ell_;
  std::optional<IsaacsFamily> family_;
  std::optional<double> tau_;
  std::optional<double> df_lipschitz_;
  SymMat shift_;
};

/// F(M) = -tr(A M). Requires spec(A) in [lambda, Lambda].
Operator linear_operator(const SymMat& a, const EllipticityPair& ell);
Operator pucci_operator(int dim, const EllipticityPair& ell, PucciSign sign);
Operator isaacs_exact(IsaacsFamily fam, const EllipticityPair& ell);
/// Soft inf-sup with temperature tau > 0; C^1 with Lipschitz derivative.
Operator isaacs_smoothed(IsaacsFamily fam, const EllipticityPair& ell, double tau);

/// Entries uniform on [-s, s], then symmetrized.
SymMat random_symmat(int dim, double s, CounterRng& rng);

/// Largest positive part of the violation of
/// P^-(M - N) <= F(M) - F(N) <= P^+(M - N) over sampled pairs.
double check_F1(const Operator& f, int n_pairs, std::uint64_t seed);

struct ModulusSamples {
  std::vector<std::pair<double, double>> samples;  // (|M - N|, |DF(M) - DF(N)|)
  double slope = 0.0;                               // max ratio over the samples
  bool finite_difference = false;
};

/// Central-difference derivative; step <= 0 selects 1e-5 (1 + |M|).
SymMat fd_derivative(const Operator& f, const SymMat& m, double step = 0.0);

/// Samples the modulus of DF. Falls back to finite differences when no
/// analytic derivative exists and step > 0.
ModulusSamples check_F2(const Operator& f, int n_pairs, double step, std::uint64_t seed);

}  // namespace pareg

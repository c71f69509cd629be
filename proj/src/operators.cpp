#include "pareg/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pareg {

void IsaacsFamily::validate(const EllipticityPair& ell) const {
  ell.validate();
  if (n_inf < 1 || n_sup < 1 || matrices.empty()) throw InputError("Isaacs family is empty");
  if (matrices.size() != static_cast<std::size_t>(n_inf * n_sup)) {
    throw InputError("Isaacs family: expected n_inf * n_sup = " + std::to_string(n_inf * n_sup) +
                     " matrices, got " + std::to_string(matrices.size()));
  }
  const int d = matrices.front().dim();
  for (std::size_t k = 0; k < matrices.size(); ++k) {
    const auto& a = matrices[k];
    if (a.dim() != d) throw InputError("Isaacs family: mixed dimensions");
    const auto e = eigenvalues(a);
    const double tol = 1e-12 * (1.0 + ell.Lambda);
    if (e.front() < ell.lambda - tol || e.back() > ell.Lambda + tol) {
      throw InputError("matrix " + std::to_string(k) + " " + to_string(a) +
                       " has eigenvalues outside [lambda, Lambda]");
    }
  }
}

std::string to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::linear: return "linear";
    case OperatorKind::pucci_plus: return "pucci_plus";
    case OperatorKind::pucci_minus: return "pucci_minus";
    case OperatorKind::isaacs: return "isaacs";
    case OperatorKind::isaacs_smoothed: return "isaacs_smoothed";
  }
  return "unknown";
}

double combine_inf_sup(std::span<const double> h, int n_inf, int n_sup, std::optional<double> tau,
                       std::span<double> weights) {
  const bool want_w = !weights.empty();
  if (!tau) {
    double best = std::numeric_limits<double>::infinity();
    int best_a = 0;
    int best_b = 0;
    for (int a = 0; a < n_inf; ++a) {
      int arg = 0;
      double mx = h[static_cast<std::size_t>(a * n_sup)];
      for (int b = 1; b < n_sup; ++b) {
        const double v = h[static_cast<std::size_t>(a * n_sup + b)];
        if (v > mx) {
          mx = v;
          arg = b;
        }
      }
      if (mx < best) {
        best = mx;
        best_a = a;
        best_b = arg;
      }
    }
    if (want_w) {
      std::fill(weights.begin(), weights.end(), 0.0);
      weights[static_cast<std::size_t>(best_a * n_sup + best_b)] = 1.0;
    }
    return best;
  }

  const double t = *tau;
  // g_a = t log sum_b exp(h_ab / t), F = -t log sum_a exp(-g_a / t).
  std::vector<double> g(static_cast<std::size_t>(n_inf));
  for (int a = 0; a < n_inf; ++a) {
    const double* row = h.data() + a * n_sup;
    const double mx = *std::max_element(row, row + n_sup);
    double s = 0.0;
    for (int b = 0; b < n_sup; ++b) s += std::exp((row[b] - mx) / t);
    g[static_cast<std::size_t>(a)] = mx + t * std::log(s);
  }
  const double mn = *std::min_element(g.begin(), g.end());
  double s = 0.0;
  for (double ga : g) s += std::exp(-(ga - mn) / t);
  const double value = mn - t * std::log(s);
  if (want_w) {
    for (int a = 0; a < n_inf; ++a) {
      const double va = std::exp(-(g[static_cast<std::size_t>(a)] - mn) / t) / s;
      const double* row = h.data() + a * n_sup;
      const double ga = g[static_cast<std::size_t>(a)];
      for (int b = 0; b < n_sup; ++b) {
        weights[static_cast<std::size_t>(a * n_sup + b)] = va * std::exp((row[b] - ga) / t);
      }
    }
  }
  return value;
}

double Operator::operator()(const SymMat& m_in) const {
  if (m_in.dim() != dim_) throw InputError("operator: dimension mismatch");
  const SymMat m = m_in + shift_;
  switch (kind_) {
    case OperatorKind::pucci_plus: return pucci(m, ell_, PucciSign::plus);
    case OperatorKind::pucci_minus: return pucci(m, ell_, PucciSign::minus);
    case OperatorKind::linear: return -inner(family_->matrices.front(), m);
    case OperatorKind::isaacs:
    case OperatorKind::isaacs_smoothed: {
      const auto& fam = *family_;
      std::vector<double> h(fam.matrices.size());
      for (std::size_t k = 0; k < h.size(); ++k) h[k] = -inner(fam.matrices[k], m);
      return combine_inf_sup(h, fam.n_inf, fam.n_sup, tau_);
    }
  }
  return 0.0;
}

SymMat Operator::derivative(const SymMat& m_in) const {
  if (m_in.dim() != dim_) throw InputError("operator: dimension mismatch");
  const SymMat m = m_in + shift_;
  switch (kind_) {
    case OperatorKind::linear: return -family_->matrices.front();
    case OperatorKind::pucci_plus: return -pucci_extremal_matrix(m, ell_, PucciSign::plus);
    case OperatorKind::pucci_minus: return -pucci_extremal_matrix(m, ell_, PucciSign::minus);
    case OperatorKind::isaacs: throw InputError("derivative unavailable for operator '" + name_ + "'");
    case OperatorKind::isaacs_smoothed: {
      const auto& fam = *family_;
      std::vector<double> h(fam.matrices.size());
      std::vector<double> w(fam.matrices.size());
      for (std::size_t k = 0; k < h.size(); ++k) h[k] = -inner(fam.matrices[k], m);
      combine_inf_sup(h, fam.n_inf, fam.n_sup, tau_, w);
      SymMat d(dim_);
      for (std::size_t k = 0; k < h.size(); ++k) d -= w[k] * fam.matrices[k];
      return d;
    }
  }
  return SymMat(dim_);
}

Operator Operator::translated(const SymMat& m0) const {
  if (m0.dim() != dim_) throw InputError("translate: dimension mismatch");
  Operator out = *this;
  out.shift_ += m0;
  return out;
}

Operator linear_operator(const SymMat& a, const EllipticityPair& ell) {
  IsaacsFamily fam{1, 1, {a}};
  fam.validate(ell);
  Operator op;
  op.kind_ = OperatorKind::linear;
  op.name_ = "linear";
  op.dim_ = a.dim();
  op.ell_ = ell;
  op.family_ = std::move(fam);
  op.df_lipschitz_ = 0.0;
  op.shift_ = SymMat(a.dim());
  return op;
}

Operator pucci_operator(int dim, const EllipticityPair& ell, PucciSign sign) {
  ell.validate();
  Operator op;
  op.kind_ = sign == PucciSign::plus ? OperatorKind::pucci_plus : OperatorKind::pucci_minus;
  op.name_ = to_string(op.kind_);
  op.dim_ = dim;
  op.ell_ = ell;
  op.shift_ = SymMat(dim);
  return op;
}

Operator isaacs_exact(IsaacsFamily fam, const EllipticityPair& ell) {
  fam.validate(ell);
  Operator op;
  op.kind_ = OperatorKind::isaacs;
  op.name_ = "isaacs";
  op.dim_ = fam.dim();
  op.ell_ = ell;
  op.shift_ = SymMat(fam.dim());
  op.family_ = std::move(fam);
  return op;
}

Operator isaacs_smoothed(IsaacsFamily fam, const EllipticityPair& ell, double tau) {
  if (!(tau > 0.0)) throw InputError("isaacs_smoothed: tau must be > 0");
  fam.validate(ell);
  double max_norm2 = 0.0;
  for (const auto& a : fam.matrices) max_norm2 = std::max(max_norm2, inner(a, a));
  Operator op;
  op.kind_ = OperatorKind::isaacs_smoothed;
  op.name_ = "isaacs_smoothed";
  op.dim_ = fam.dim();
  op.ell_ = ell;
  op.shift_ = SymMat(fam.dim());
  op.family_ = std::move(fam);
  op.tau_ = tau;
  op.df_lipschitz_ = 2.0 * max_norm2 / tau;
  return op;
}

SymMat random_symmat(int dim, double s, CounterRng& rng) {
  std::vector<double> dense(static_cast<std::size_t>(dim * dim));
  for (double& v : dense) v = rng.uniform(-s, s);
  return SymMat::from_dense(dim, dense);
}

namespace {
constexpr double kScales[] = {0.1, 1.0, 10.0};
}

double check_F1(const Operator& f, int n_pairs, std::uint64_t seed) {
  if (n_pairs < 1) throw InputError("check_F1: n_pairs must be >= 1");
  CounterRng rng(seed);
  double worst = 0.0;
  for (int k = 0; k < n_pairs; ++k) {
    const double s = kScales[k % 3];
    const SymMat m = random_symmat(f.dim(), s, rng);
    const SymMat n = random_symmat(f.dim(), s, rng);
    const double diff = f(m) - f(n);
    const double lo = pucci(m - n, f.ellipticity(), PucciSign::minus);
    const double hi = pucci(m - n, f.ellipticity(), PucciSign::plus);
    worst = std::max({worst, lo - diff, diff - hi});
  }
  return worst;
}

SymMat fd_derivative(const Operator& f, const SymMat& m, double step) {
  const double s = step > 0.0 ? step : 1e-5 * (1.0 + m.frobenius_norm());
  const int d = m.dim();
  SymMat out(d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      SymMat e(d);
      e.set(i, j, 1.0);
      const double dd = (f(m + s * e) - f(m - s * e)) / (2.0 * s);
      // Off-diagonal perturbations move both (i,j) and (j,i).
      out.set(i, j, i == j ? dd : 0.5 * dd);
    }
  }
  return out;
}

ModulusSamples check_F2(const Operator& f, int n_pairs, double step, std::uint64_t seed) {
  if (n_pairs < 1) throw InputError("check_F2: n_pairs must be >= 1");
  const bool analytic = f.has_derivative();
  if (!analytic && !(step > 0.0)) {
    throw InputError("derivative unavailable for operator '" + f.name() +
                     "' and no finite-difference step given");
  }
  CounterRng rng(seed);
  ModulusSamples out;
  out.finite_difference = !analytic;
  for (int k = 0; k < n_pairs; ++k) {
    const double s = kScales[k % 3];
    const SymMat m = random_symmat(f.dim(), s, rng);
    const SymMat n = random_symmat(f.dim(), s, rng);
    const SymMat dm = analytic ? f.derivative(m) : fd_derivative(f, m, step);
    const SymMat dn = analytic ? f.derivative(n) : fd_derivative(f, n, step);
    const double x = (m - n).frobenius_norm();
    const double y = (dm - dn).frobenius_norm();
    out.samples.emplace_back(x, y);
    if (x > 0.0) out.slope = std::max(out.slope, y / x);
  }
  return out;
}

}  // namespace pareg

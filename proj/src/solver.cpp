#include "pareg/solver.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace pareg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Index negate(const Index& e) { return Index{-e[0], -e[1], -e[2]}; }

std::vector<double> as_vector(const Index& e, int d) {
  std::vector<double> v(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i)] = e[static_cast<std::size_t>(i)];
  return v;
}

// Lawson-Hanson active-set NNLS: min |G c - a| subject to c >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& g, const Eigen::VectorXd& a) {
  const Eigen::Index k = g.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
  std::vector<bool> passive(static_cast<std::size_t>(k), false);
  const double tol = 1e-14 * (1.0 + g.norm() * a.norm());
  for (int outer = 0; outer < 3 * k + 10; ++outer) {
    const Eigen::VectorXd w = g.transpose() * (a - g * x);
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > tol && (best < 0 || w(j) > w(best))) best = j;
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;
    for (int inner = 0; inner < 3 * k + 10; ++inner) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
      }
      Eigen::MatrixXd gp(g.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t c = 0; c < idx.size(); ++c) gp.col(static_cast<Eigen::Index>(c)) = g.col(idx[c]);
      const Eigen::VectorXd sp = gp.colPivHouseholderQr().solve(a);
      Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
      for (std::size_t c = 0; c < idx.size(); ++c) s(idx[c]) = sp(static_cast<Eigen::Index>(c));
      bool positive = true;
      for (Eigen::Index j : idx) positive = positive && s(j) > 0.0;
      if (positive) {
        x = s;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index j : idx) {
        if (s(j) <= 0.0) alpha = std::min(alpha, x(j) / (x(j) - s(j)));
      }
      x += alpha * (s - x);
      for (Eigen::Index j : idx) {
        if (x(j) <= 1e-15) {
          x(j) = 0.0;
          passive[static_cast<std::size_t>(j)] = false;
        }
      }
    }
  }
  return x;
}

SymMat combination(const std::vector<double>& c, const Stencil& s) {
  SymMat out(s.dim);
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (c[k] != 0.0) out += c[k] * SymMat::projector(as_vector(s.directions[k], s.dim));
  }
  return out;
}

// Gradient of F at M paired through tr(G H); exact Isaacs uses its active
// member.
SymMat operator_gradient(const Operator& op, const SymMat& m) {
  if (op.has_derivative()) return op.derivative(m);
  const auto& fam = *op.family();
  const SymMat mm = m + op.shift();
  std::vector<double> h(fam.matrices.size());
  std::vector<double> w(fam.matrices.size());
  for (std::size_t j = 0; j < h.size(); ++j) h[j] = -inner(fam.matrices[j], mm);
  combine_inf_sup(h, fam.n_inf, fam.n_sup, std::nullopt, w);
  SymMat g(m.dim());
  for (std::size_t j = 0; j < h.size(); ++j) g -= w[j] * fam.matrices[j];
  return g;
}

}  // namespace

double Stencil::length(std::size_t k) const {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += directions[k][static_cast<std::size_t>(i)] * directions[k][static_cast<std::size_t>(i)];
  return std::sqrt(s);
}

void Stencil::validate() const {
  if (dim < 2 || dim > kMaxGridDim) throw InputError("stencil dimension must be 2 or 3");
  std::set<Index> seen;
  for (const Index& e : directions) {
    for (int i = dim; i < kMaxGridDim; ++i) {
      if (e[static_cast<std::size_t>(i)] != 0) throw InputError("stencil direction has extra components");
    }
    if (e == Index{}) throw InputError("stencil contains a zero direction");
    if (seen.count(e) || seen.count(negate(e))) throw InputError("stencil directions must be distinct up to sign");
    seen.insert(e);
  }
  for (int i = 0; i < dim; ++i) {
    Index ax{};
    ax[static_cast<std::size_t>(i)] = 1;
    if (!seen.count(ax) && !seen.count(negate(ax))) throw InputError("stencil must contain every coordinate axis");
  }
}

Stencil Stencil::axes(int dim) {
  Stencil s{dim, {}};
  for (int i = 0; i < dim; ++i) {
    Index e{};
    e[static_cast<std::size_t>(i)] = 1;
    s.directions.push_back(e);
  }
  s.validate();
  return s;
}

Stencil Stencil::axes_diagonals(int dim) {
  Stencil s = axes(dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) {
      for (int sg : {1, -1}) {
        Index e{};
        e[static_cast<std::size_t>(i)] = 1;
        e[static_cast<std::size_t>(j)] = sg;
        s.directions.push_back(e);
      }
    }
  }
  s.validate();
  return s;
}

Stencil Stencil::standard(int dim) {
  Stencil s = axes_diagonals(dim);
  if (dim == 2) {
    for (const Index& e : {Index{2, 1, 0}, Index{2, -1, 0}, Index{1, 2, 0}, Index{1, -2, 0}}) s.directions.push_back(e);
  } else if (dim == 3) {
    for (const Index& e : {Index{1, 1, 1}, Index{1, 1, -1}, Index{1, -1, 1}, Index{1, -1, -1}}) s.directions.push_back(e);
  }
  s.validate();
  return s;
}

double second_diff(const GridFn& u, const Index& e, std::size_t node) {
  const Grid& g = *u.grid;
  const auto p = g.neighbor(node, e);
  const auto m = g.neighbor(node, negate(e));
  if (!p || !m) throw InputError("second_diff: neighbor outside the grid box");
  double len2 = 0.0;
  for (int i = 0; i < g.dim(); ++i) len2 += e[static_cast<std::size_t>(i)] * e[static_cast<std::size_t>(i)];
  return (u.values[*p] - 2.0 * u.values[node] + u.values[*m]) / (len2 * g.h() * g.h());
}

FrameFit nonnegative_frame_fit(const SymMat& a, const Stencil& stencil, double fit_tol) {
  stencil.validate();
  if (a.dim() != stencil.dim) throw InputError("frame fit: dimension mismatch");
  const auto q = static_cast<Eigen::Index>(a.packed_size());
  const auto k = static_cast<Eigen::Index>(stencil.size());
  Eigen::MatrixXd g(q, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const SymMat p = SymMat::projector(as_vector(stencil.directions[static_cast<std::size_t>(c)], stencil.dim));
    for (Eigen::Index r = 0; r < q; ++r) g(r, c) = p.packed()[static_cast<std::size_t>(r)];
  }
  Eigen::VectorXd rhs(q);
  for (Eigen::Index r = 0; r < q; ++r) rhs(r) = a.packed()[static_cast<std::size_t>(r)];

  // A small Tikhonov term selects the minimal-norm member of the solution
  // set; the support is then re-solved exactly.
  const double mu = 1e-6 * (1.0 + a.frobenius_norm());
  Eigen::MatrixXd ga(q + k, k);
  ga << g, mu * Eigen::MatrixXd::Identity(k, k);
  Eigen::VectorXd ra = Eigen::VectorXd::Zero(q + k);
  ra.head(q) = rhs;
  const Eigen::VectorXd reg = nnls(ga, ra);

  auto residual_of = [&](const Eigen::VectorXd& c) { return (g * c - rhs).norm(); };
  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (reg(j) > 1e-9 * (1.0 + a.frobenius_norm())) support.push_back(j);
  }
  Eigen::VectorXd best = reg;
  if (!support.empty()) {
    Eigen::MatrixXd gs(q, static_cast<Eigen::Index>(support.size()));
    for (std::size_t c = 0; c < support.size(); ++c) gs.col(static_cast<Eigen::Index>(c)) = g.col(support[c]);
    const Eigen::VectorXd cs = gs.completeOrthogonalDecomposition().solve(rhs);
    Eigen::VectorXd exact = Eigen::VectorXd::Zero(k);
    bool nonneg = true;
    for (std::size_t c = 0; c < support.size(); ++c) {
      const double v = cs(static_cast<Eigen::Index>(c));
      nonneg = nonneg && v >= -1e-13;
      exact(support[c]) = std::max(0.0, v);
    }
    if (nonneg && residual_of(exact) <= residual_of(reg) + 1e-14) best = exact;
  }
  FrameFit fit;
  fit.coeffs.assign(best.data(), best.data() + k);
  for (double& c : fit.coeffs) {
    if (std::abs(c) < 1e-15) c = 0.0;
  }
  fit.residual = (combination(fit.coeffs, stencil) - a).frobenius_norm();
  if (fit.residual > fit_tol * (1.0 + a.frobenius_norm())) {
    throw InputError("matrix " + to_string(a) + " admits no nonnegative fit on the " +
                     std::to_string(stencil.size()) + "-direction stencil (residual " + format_double(fit.residual) +
                     "); use a wider stencil");
  }
  return fit;
}

IsaacsFamily scheme_family(const Operator& op, const Stencil& stencil) {
  if (op.kind() != OperatorKind::pucci_plus && op.kind() != OperatorKind::pucci_minus) return *op.family();
  const int d = op.dim();
  const auto& ell = op.ellipticity();
  // Orthogonal d-tuples of stencil directions, in lexicographic order.
  std::vector<std::vector<std::size_t>> frames;
  std::vector<std::size_t> cur;
  auto dot = [&](std::size_t a, std::size_t b) {
    long s = 0;
    for (int i = 0; i < d; ++i) s += long{stencil.directions[a][static_cast<std::size_t>(i)]} * stencil.directions[b][static_cast<std::size_t>(i)];
    return s;
  };
  auto extend = [&](auto&& self, std::size_t start) -> void {
    if (static_cast<int>(cur.size()) == d) {
      frames.push_back(cur);
      return;
    }
    for (std::size_t k = start; k < stencil.size(); ++k) {
      bool ok = true;
      for (std::size_t c : cur) ok = ok && dot(c, k) == 0;
      if (!ok) continue;
      cur.push_back(k);
      self(self, k + 1);
      cur.pop_back();
    }
  };
  extend(extend, 0);
  std::vector<SymMat> members;
  for (const auto& fr : frames) {
    for (int mask = 0; mask < (1 << d); ++mask) {
      SymMat a(d);
      for (int i = 0; i < d; ++i) {
        const double ai = (mask >> i) & 1 ? ell.Lambda : ell.lambda;
        a += ai * SymMat::projector(as_vector(stencil.directions[fr[static_cast<std::size_t>(i)]], d));
      }
      bool dup = false;
      for (const SymMat& b : members) dup = dup || (a - b).max_abs() <= 1e-14;
      if (!dup) members.push_back(a);
    }
  }
  const int m = static_cast<int>(members.size());
  return op.kind() == OperatorKind::pucci_plus ? IsaacsFamily{1, m, members} : IsaacsFamily{m, 1, members};
}

DiscreteOperator::DiscreteOperator(const DiscreteProblem& p)
    : op_(p.op), grid_(p.grid), stencil_(p.stencil), scheme_(p.scheme) {
  const Grid& g = *grid_;
  if (op_.dim() != g.dim()) throw InputError("operator and grid dimensions differ");
  if (p.boundary.grid == nullptr || p.boundary.values.size() != g.size()) {
    throw InputError("boundary data must be sampled on the problem grid");
  }
  std::vector<Index> required;
  if (scheme_ == Scheme::monotone_frames) {
    stencil_.validate();
    if (stencil_.dim != g.dim()) throw InputError("stencil and grid dimensions differ");
    if (op_.kind() == OperatorKind::isaacs_smoothed || op_.kind() == OperatorKind::isaacs ||
        op_.kind() == OperatorKind::linear || op_.kind() == OperatorKind::pucci_plus ||
        op_.kind() == OperatorKind::pucci_minus) {
      family_ = scheme_family(op_, stencil_);
    }
    for (const SymMat& a : family_.matrices) {
      coeffs_.push_back(nonnegative_frame_fit(a, stencil_, p.fit_tol).coeffs);
      shift_terms_.push_back(-inner(a, op_.shift()));
    }
    for (const Index& e : stencil_.directions) {
      required.push_back(e);
      required.push_back(negate(e));
    }
  } else {
    offsets_ = Stencil::axes_diagonals(g.dim()).directions;
    for (const Index& e : offsets_) {
      required.push_back(e);
      required.push_back(negate(e));
    }
  }
  unknown_.assign(g.size(), -1);
  for (std::size_t k : g.domain_nodes()) {
    bool inside = true;
    for (const Index& e : required) {
      const auto nb = g.neighbor(k, e);
      if (!nb || !g.in_domain(*nb)) {
        inside = false;
        break;
      }
    }
    if (inside) {
      unknown_[k] = static_cast<std::int64_t>(interior_.size());
      interior_.push_back(k);
    } else {
      dirichlet_.push_back(k);
      if (!std::isfinite(p.boundary.values[k])) {
        throw InputError("boundary data is not finite at node " + std::to_string(k));
      }
    }
  }
  if (interior_.empty()) throw InputError("grid has no interior nodes for this stencil");
}

double DiscreteOperator::member_values(const GridFn& u, std::size_t node, std::vector<double>& h,
                                       std::vector<double>& diffs) const {
  const Grid& g = *grid_;
  const double h2 = g.h() * g.h();
  if (scheme_ == Scheme::monotone_frames) {
    diffs.resize(stencil_.size());
    for (std::size_t k = 0; k < stencil_.size(); ++k) {
      const Index& e = stencil_.directions[k];
      const std::size_t p = *g.neighbor(node, e);
      const std::size_t m = *g.neighbor(node, negate(e));
      const double len = stencil_.length(k);
      diffs[k] = (u.values[p] - 2.0 * u.values[node] + u.values[m]) / (len * len * h2);
    }
    h.resize(coeffs_.size());
    for (std::size_t j = 0; j < coeffs_.size(); ++j) {
      double s = shift_terms_[j];
      for (std::size_t k = 0; k < diffs.size(); ++k) s -= coeffs_[j][k] * diffs[k];
      h[j] = s;
    }
    return combine_inf_sup(h, family_.n_inf, family_.n_sup, op_.tau());
  }
  const int d = g.dim();
  SymMat m(d);
  for (int i = 0; i < d; ++i) {
    Index e{};
    e[static_cast<std::size_t>(i)] = 1;
    m.set(i, i, (u.values[*g.neighbor(node, e)] - 2.0 * u.values[node] + u.values[*g.neighbor(node, negate(e))]) / h2);
    for (int j = i + 1; j < d; ++j) {
      Index pp{};
      pp[static_cast<std::size_t>(i)] = 1;
      pp[static_cast<std::size_t>(j)] = 1;
      Index pm{};
      pm[static_cast<std::size_t>(i)] = 1;
      pm[static_cast<std::size_t>(j)] = -1;
      const double v = u.values[*g.neighbor(node, pp)] - u.values[*g.neighbor(node, pm)] -
                       u.values[*g.neighbor(node, negate(pm))] + u.values[*g.neighbor(node, negate(pp))];
      m.set(i, j, v / (4.0 * h2));
    }
  }
  diffs.assign(m.packed().begin(), m.packed().end());
  return op_(m);
}

double DiscreteOperator::residual_at(const GridFn& u, std::size_t node) const {
  if (unknown_[node] < 0) throw InputError("residual_at: node is not interior");
  std::vector<double> h;
  std::vector<double> diffs;
  return member_values(u, node, h, diffs);
}

std::vector<double> DiscreteOperator::residual(const GridFn& u) const {
  std::vector<double> out(interior_.size());
  std::vector<double> h;
  std::vector<double> diffs;
  for (std::size_t r = 0; r < interior_.size(); ++r) out[r] = member_values(u, interior_[r], h, diffs);
  return out;
}

double DiscreteOperator::cfl_tau(double safety) const {
  const double h2 = grid_->h() * grid_->h();
  double diag = 0.0;
  if (scheme_ == Scheme::monotone_frames) {
    for (const auto& c : coeffs_) {
      double s = 0.0;
      for (std::size_t k = 0; k < c.size(); ++k) s += c[k] / (stencil_.length(k) * stencil_.length(k));
      diag = std::max(diag, 2.0 * s);
    }
  } else {
    diag = 2.0 * grid_->dim() * op_.ellipticity().Lambda;
  }
  return safety * h2 / diag;
}

DiscreteOperator::Linearization DiscreteOperator::linearize(const GridFn& u) const {
  const Grid& g = *grid_;
  const double h2 = g.h() * g.h();
  Linearization lin;
  lin.residual.resize(interior_.size());
  std::vector<double> h;
  std::vector<double> diffs;
  std::vector<double> w;
  auto push = [&](std::size_t row, std::size_t node, double v) {
    const std::int64_t col = unknown_[node];
    if (col < 0 || v == 0.0) return;
    lin.rows.push_back(row);
    lin.cols.push_back(static_cast<std::size_t>(col));
    lin.values.push_back(v);
  };
  for (std::size_t r = 0; r < interior_.size(); ++r) {
    const std::size_t node = interior_[r];
    if (scheme_ == Scheme::monotone_frames) {
      member_values(u, node, h, diffs);
      w.assign(h.size(), 0.0);
      lin.residual[r] = combine_inf_sup(h, family_.n_inf, family_.n_sup, op_.tau(), w);
      double center = 0.0;
      for (std::size_t k = 0; k < stencil_.size(); ++k) {
        double c = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) c += w[j] * coeffs_[j][k];
        const double len = stencil_.length(k);
        const double a = c / (len * len * h2);
        center += 2.0 * a;
        push(r, *g.neighbor(node, stencil_.directions[k]), -a);
        push(r, *g.neighbor(node, negate(stencil_.directions[k])), -a);
      }
      push(r, node, center);
    } else {
      lin.residual[r] = member_values(u, node, h, diffs);
      const SymMat m = SymMat::from_dense(g.dim(), [&] {
        std::vector<double> dense(static_cast<std::size_t>(g.dim() * g.dim()));
        int c = 0;
        for (int i = 0; i < g.dim(); ++i) {
          for (int j = i; j < g.dim(); ++j) {
            dense[static_cast<std::size_t>(i * g.dim() + j)] = diffs[static_cast<std::size_t>(c)];
            dense[static_cast<std::size_t>(j * g.dim() + i)] = diffs[static_cast<std::size_t>(c)];
            ++c;
          }
        }
        return dense;
      }());
      const SymMat gr = operator_gradient(op_, m);
      double center = 0.0;
      for (int i = 0; i < g.dim(); ++i) {
        Index e{};
        e[static_cast<std::size_t>(i)] = 1;
        const double a = gr(i, i) / h2;
        center -= 2.0 * a;
        push(r, *g.neighbor(node, e), a);
        push(r, *g.neighbor(node, negate(e)), a);
        for (int j = i + 1; j < g.dim(); ++j) {
          // tr(G H) counts the off-diagonal pair twice.
          const double b = 2.0 * gr(i, j) / (4.0 * h2);
          Index pp{};
          pp[static_cast<std::size_t>(i)] = 1;
          pp[static_cast<std::size_t>(j)] = 1;
          Index pm{};
          pm[static_cast<std::size_t>(i)] = 1;
          pm[static_cast<std::size_t>(j)] = -1;
          push(r, *g.neighbor(node, pp), b);
          push(r, *g.neighbor(node, negate(pp)), b);
          push(r, *g.neighbor(node, pm), -b);
          push(r, *g.neighbor(node, negate(pm)), -b);
        }
      }
      push(r, node, center);
    }
  }
  return lin;
}

GridFn harmonic_extension(const DiscreteOperator& op, const DiscreteProblem& p) {
  const Grid& g = *p.grid;
  GridFn u{p.grid, std::vector<double>(g.size(), kNaN)};
  for (std::size_t k : op.dirichlet()) u.values[k] = p.boundary.values[k];
  const auto& idx = op.unknown_index();
  const auto n = static_cast<Eigen::Index>(op.interior().size());
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (std::size_t r = 0; r < op.interior().size(); ++r) {
    const std::size_t k = op.interior()[r];
    const auto row = static_cast<Eigen::Index>(r);
    trip.emplace_back(row, row, 2.0 * g.dim());
    for (int i = 0; i < g.dim(); ++i) {
      for (int s : {-1, 1}) {
        Index e{};
        e[static_cast<std::size_t>(i)] = s;
        const std::size_t nb = *g.neighbor(k, e);
        if (idx[nb] >= 0) {
          trip.emplace_back(row, static_cast<Eigen::Index>(idx[nb]), -1.0);
        } else {
          rhs(row) += p.boundary.values[nb];
        }
      }
    }
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
  if (solver.info() != Eigen::Success) throw NumericalError("harmonic extension: factorization failed");
  const Eigen::VectorXd x = solver.solve(rhs);
  for (std::size_t r = 0; r < op.interior().size(); ++r) u.values[op.interior()[r]] = x(static_cast<Eigen::Index>(r));
  return u;
}

namespace {

double sup_norm(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) {
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    s = std::max(s, std::abs(v));
  }
  return s;
}

void record(SolveResult& res, double r) {
  if (!std::isfinite(r)) throw NumericalError("solver diverged: non-finite residual (step too large for the CFL bound?)");
  if (!res.residual_history.empty() && r > res.residual_history.back()) ++res.residual_increases;
  res.residual_history.push_back(r);
}

}  // namespace

SolveResult solve_dirichlet(const DiscreteProblem& p, const SolveOptions& opt) {
  if (!(opt.tol > 0.0)) throw InputError("solve: tol must be > 0");
  if (opt.max_iters < 1) throw InputError("solve: max_iters must be >= 1");
  const DiscreteOperator op(p);
  SolveResult res;
  res.u = harmonic_extension(op, p);
  res.tau = op.cfl_tau(opt.cfl_safety);
  const auto& interior = op.interior();

  auto explicit_steps = [&](int count) {
    for (int it = 0; it < count && res.iterations < opt.max_iters; ++it) {
      const auto r = op.residual(res.u);
      const double nr = sup_norm(r);
      if (nr <= opt.tol) {
        res.converged = true;
        return;
      }
      for (std::size_t i = 0; i < interior.size(); ++i) res.u.values[interior[i]] -= res.tau * r[i];
      ++res.iterations;
      record(res, sup_norm(op.residual(res.u)));
    }
  };

  record(res, sup_norm(op.residual(res.u)));
  if (res.residual_history.back() <= opt.tol) {
    res.converged = true;
    return res;
  }
  if (opt.method == SolveMethod::explicit_euler) {
    explicit_steps(opt.max_iters);
    if (!res.converged) res.converged = res.residual_history.back() <= opt.tol;
    return res;
  }

  const auto n = static_cast<Eigen::Index>(interior.size());
  while (res.iterations < opt.max_iters) {
    const auto lin = op.linearize(res.u);
    const double r0 = sup_norm(lin.residual);
    if (r0 <= opt.tol) {
      res.converged = true;
      break;
    }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(lin.values.size());
    for (std::size_t t = 0; t < lin.values.size(); ++t) {
      trip.emplace_back(static_cast<Eigen::Index>(lin.rows[t]), static_cast<Eigen::Index>(lin.cols[t]), lin.values[t]);
    }
    Eigen::SparseMatrix<double> jac(n, n);
    jac.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(jac);
    bool stepped = false;
    if (lu.info() == Eigen::Success) {
      const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(lin.residual.data(), n);
      const Eigen::VectorXd delta = lu.solve(rhs);
      if (delta.allFinite()) {
        GridFn trial = res.u;
        for (double t = 1.0; t >= 1.0 / 64; t *= 0.5) {
          for (std::size_t i = 0; i < interior.size(); ++i) {
            trial.values[interior[i]] = res.u.values[interior[i]] - t * delta(static_cast<Eigen::Index>(i));
          }
          const double r1 = sup_norm(op.residual(trial));
          if (r1 < (1.0 - 1e-4 * t) * r0) {
            res.u = trial;
            ++res.iterations;
            record(res, r1);
            stepped = true;
            break;
          }
        }
      }
    }
    if (!stepped) {
      // Nonsmooth stall: fall back to monotone explicit steps for a while.
      explicit_steps(50);
      if (res.converged) break;
    }
  }
  if (!res.converged) res.converged = res.residual_history.back() <= opt.tol;
  return res;
}

ComparisonResult comparison_check(const DiscreteProblem& p, const GridFn& g1, const GridFn& g2,
                                  const SolveOptions& opt) {
  DiscreteProblem p1 = p;
  p1.boundary = g1;
  DiscreteProblem p2 = p;
  p2.boundary = g2;
  const DiscreteOperator op(p1);
  for (std::size_t k : op.dirichlet()) {
    if (g1.values[k] > g2.values[k]) throw InputError("comparison_check: boundary data must satisfy g1 <= g2");
  }
  const SolveResult s1 = solve_dirichlet(p1, opt);
  const SolveResult s2 = solve_dirichlet(p2, opt);
  if (!s1.converged || !s2.converged) throw NumericalError("comparison_check: solve did not converge");
  ComparisonResult out;
  out.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t k : p.grid->domain_nodes()) out.min_gap = std::min(out.min_gap, s2.u.values[k] - s1.u.values[k]);
  out.holds = out.min_gap >= -10.0 * opt.tol;
  return out;
}

}  // namespace pareg

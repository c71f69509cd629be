#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pareg/grid.hpp"
#include "pareg/operators.hpp"

namespace pareg {

/// Integer offsets used for directional second differences, stored up to
/// sign. Always contains the coordinate axes.
struct Stencil {
  int dim = 2;
  std::vector<Index> directions;

  double length(std::size_t k) const;
  std::size_t size() const { return directions.size(); }
  void validate() const;

  static Stencil axes(int dim);
  /// Axes plus the diagonals e_i +- e_j.
  static Stencil axes_diagonals(int dim);
  /// d = 2: axes, diagonals, (2,+-1), (1,+-2). d = 3: axes, face and body diagonals.
  static Stencil standard(int dim);
};

/// (u(x + e h) - 2 u(x) + u(x - e h)) / (|e| h)^2.
double second_diff(const GridFn& u, const Index& e, std::size_t node);

struct FrameFit {
  std::vector<double> coeffs;  // one per stencil direction, >= 0
  double residual = 0.0;       // |sum c_k e_k e_k^T / |e_k|^2 - A|_F
};

/// Minimal-norm nonnegative c with A = sum_k c_k e_k e_k^T / |e_k|^2.
/// Throws InputError naming A when no fit within fit_tol exists.
FrameFit nonnegative_frame_fit(const SymMat& a, const Stencil& stencil, double fit_tol = 1e-10);

enum class Scheme { monotone_frames, fd_hessian };

struct DiscreteProblem {
  Operator op;
  GridPtr grid;
  Stencil stencil;
  GridFn boundary;  // read on the Dirichlet nodes only
  Scheme scheme = Scheme::monotone_frames;
  double fit_tol = 1e-10;
};

/// Matrices the monotone scheme combines: the operator's own family, or
/// for Pucci operators the 2^d extremal diagonals over every orthogonal
/// frame drawn from the stencil.
IsaacsFamily scheme_family(const Operator& op, const Stencil& stencil);

/// F_h[u] at interior nodes. Interior = domain nodes whose stencil
/// neighbors all lie in the domain; the other domain nodes carry data.
class DiscreteOperator {
 public:
  explicit DiscreteOperator(const DiscreteProblem& p);

  const std::vector<std::size_t>& interior() const { return interior_; }
  const std::vector<std::size_t>& dirichlet() const { return dirichlet_; }
  const std::vector<std::int64_t>& unknown_index() const { return unknown_; }
  const IsaacsFamily& family() const { return family_; }
  /// coefficients()[j][k]: weight of direction k in member j.
  const std::vector<std::vector<double>>& coefficients() const { return coeffs_; }

  double residual_at(const GridFn& u, std::size_t node) const;
  /// Residuals in interior() order.
  std::vector<double> residual(const GridFn& u) const;
  /// Largest explicit step keeping u - tau F_h[u] monotone, times safety.
  double cfl_tau(double safety) const;

  struct Linearization {
    std::vector<double> residual;                 // interior() order
    std::vector<std::size_t> rows, cols;          // unknown indices
    std::vector<double> values;
  };
  /// Residual and its (semi-smooth) Jacobian with respect to the unknowns.
  Linearization linearize(const GridFn& u) const;

 private:
  double member_values(const GridFn& u, std::size_t node, std::vector<double>& h,
                       std::vector<double>& diffs) const;

  Operator op_;
  GridPtr grid_;
  Stencil stencil_;
  Scheme scheme_;
  IsaacsFamily family_;
  std::vector<std::vector<double>> coeffs_;
  std::vector<double> shift_terms_;  // -tr(A_j shift)
  std::vector<Index> offsets_;       // fd-hessian neighbor offsets
  std::vector<std::size_t> interior_;
  std::vector<std::size_t> dirichlet_;
  std::vector<std::int64_t> unknown_;
};

enum class SolveMethod { newton, explicit_euler };

struct SolveOptions {
  double tol = 1e-8;
  int max_iters = 200;
  SolveMethod method = SolveMethod::newton;
  double cfl_safety = 0.9;
};

struct SolveResult {
  GridFn u;
  std::vector<double> residual_history;  // sup-norm residual per iterate
  bool converged = false;
  int iterations = 0;
  int residual_increases = 0;  // iterations whose residual exceeded the previous one
  double tau = 0.0;            // explicit step (explicit method)
};

/// Initial guess: 5-point harmonic extension of the Dirichlet data.
GridFn harmonic_extension(const DiscreteOperator& op, const DiscreteProblem& p);

SolveResult solve_dirichlet(const DiscreteProblem& p, const SolveOptions& opt = {});

struct ComparisonResult {
  bool holds = false;
  double min_gap = 0.0;  // min (u2 - u1) over the domain
};

/// Solves with g1 and g2 (g1 <= g2 on the Dirichlet nodes) and checks
/// u1 <= u2 + 10 tol. Throws NumericalError if either solve fails.
ComparisonResult comparison_check(const DiscreteProblem& p, const GridFn& g1, const GridFn& g2,
                                  const SolveOptions& opt = {});

}  // namespace pareg

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "pareg/analysis.hpp"
#include "pareg/contact.hpp"
#include "pareg/grid.hpp"
#include "pareg/symmat.hpp"

namespace pareg {

/// Radial bump family u(x) = R^{a+2} |x|^{-a} + (a/2)|x|^2 - (1 + a/2) R^2
/// for 0 < |x| < R and 0 beyond. Only the first two coordinates enter.
struct CounterexampleParams {
  double alpha = 1.0;
  double R = 1.0;
  EllipticityPair ell{1.0, 2.0};

  void validate() const;
  /// 0 < alpha <= Lambda / lambda - 1 (required for the P^+ lower bound).
  bool pde_admissible() const;
};

double counterexample_u(const CounterexampleParams& p, double r);
double counterexample_u(const CounterexampleParams& p, const Point& x);
/// d u / d r; continuous across r = R.
double counterexample_du(const CounterexampleParams& p, double r);

/// (radial, tangential) Hessian eigenvalues for 0 < r < R, in increasing order.
std::pair<double, double> counterexample_hessian_eigs(const CounterexampleParams& p, double r);

struct EpruneqReport {
  double bound = 0.0;       // -2 Lambda alpha
  double min_margin = 0.0;  // min over nodes of P^+(D^2 u) - bound
  double min_margin_inside = 0.0;  // over 0 < |x| < R only
  std::size_t nodes = 0;
  std::size_t inside = 0;
  std::size_t violations = 0;
};

/// Evaluates P^+ from the closed-form spectrum at every domain node except
/// the origin. Throws InputError unless 0 < alpha <= Lambda/lambda - 1.
EpruneqReport verify_epruneq(const CounterexampleParams& p, const Grid& grid);

/// Radius where (lambda / (Lambda alpha)) u reaches the clamp level 1.
double clamp_radius(const CounterexampleParams& p);

/// B_1 grid in dimension dim with n + 1 nodes per half-axis, offset by h/2
/// in every coordinate so that no node sits on a lattice point 2R Z^2.
GridPtr counterexample_grid(int dim, int n);

/// v(x) = -|x|^2 + sum_{y in Z^2} min(1, (lambda / (Lambda alpha)) u(x - 2R y)),
/// sampled on every node of the box. Throws InputError if a node lies on a
/// lattice center.
GridFn counterexample_v(const CounterexampleParams& p, GridPtr grid);

/// Copies a planar field onto a 3-d grid, constant in x_3. Nodes are matched
/// by their first two multi-index components.
GridFn lift_dummy(const GridFn& planar, GridPtr grid3);

struct LepsilonRow {
  double R = 0.0;
  double integral = 0.0;  // sum Theta_lower(v)^eps h^d over B_{1/2}
  double growth = 0.0;    // integral / previous integral, NaN for the first row
  double clamp_radius = 0.0;
  std::size_t capped = 0;
  TailFit tail;
  bool tail_ok = false;
  std::string tail_error;
};

struct LepsilonReport {
  double alpha = 0.0;
  double epsilon = 0.0;
  EllipticityPair ell;
  int n = 0;
  std::vector<LepsilonRow> rows;
  double slope = 0.0;            // fitted d log(integral) / d log R
  double predicted_slope = 0.0;  // 2 (2 - (alpha + 2) eps) / alpha
  double conjectured_epsilon = 0.0;  // 2 / (Lambda/lambda + 1)
};

struct LepsilonOptions {
  int n = 256;
  ContactOptions contact;
  /// Per-R theta fields, filled when non-null (row order).
  std::vector<CurvatureField>* fields = nullptr;
};

/// Requires (alpha + 2) eps > 2, (Lambda/lambda + 1) eps > 2, R_list strictly
/// decreasing and each R >= 4h.
LepsilonReport lepsilon_growth(const CounterexampleParams& p, double epsilon, std::span<const double> R_list,
                               const LepsilonOptions& opt = {});

}  // namespace pareg

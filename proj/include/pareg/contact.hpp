#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pareg/grid.hpp"

namespace pareg {

inline constexpr double kDefaultCap = 1e6;

enum class ContactMethod { exact, bisection };

struct ContactOptions {
  double cap = kDefaultCap;
  /// exact: minimize the opening A as an LP variable. bisection: search A
  /// in [0, cap] with an LP feasibility test per probe.
  ContactMethod method = ContactMethod::exact;
  double tol_A = 0.0;  // bisection tolerance, 0 = 1e-6 (1 + cap)
  int threads = 1;
  /// exact: half-width in nodes of the neighborhood solved before the
  /// full-set verification; 0 = solve on the full set directly. The
  /// optimum does not depend on it.
  int local_window = 8;

  double bisection_tol() const { return tol_A > 0.0 ? tol_A : 1e-6 * (1.0 + cap); }
};

/// Packed coordinates and values of the nodes a touching function must
/// stay below (or above). Row i of every LP refers to node i of this set.
class ConstraintSet {
 public:
  /// mask empty = the grid domain.
  ConstraintSet(const GridFn& u, std::span<const std::uint8_t> mask = {});

  int dim() const { return dim_; }
  std::size_t size() const { return nodes_.size(); }
  const double* coord(std::size_t i) const { return coords_.data() + i * static_cast<std::size_t>(dim_); }
  double value(std::size_t i) const { return values_[i]; }
  /// |y_i|^2, and bounds on |u|, |y|^2 and max_k |y_k| over the set.
  double sqnorm(std::size_t i) const { return sqnorms_[i]; }
  double max_abs_value() const { return max_abs_value_; }
  double max_sqnorm() const { return max_sqnorm_; }
  double max_abs_coord() const { return max_abs_coord_; }
  std::size_t node(std::size_t i) const { return nodes_[i]; }
  /// Position of a grid node in the set; throws InputError if absent.
  std::size_t position(std::size_t node) const;
  /// Positions of the set nodes within Chebyshev index distance `radius`
  /// of the node at `pos`, ascending.
  void window(std::size_t pos, int radius, std::vector<std::size_t>& out) const;

  ConstraintSet negated() const;

 private:
  ConstraintSet() = default;
  GridPtr grid_;
  int dim_ = 0;
  std::vector<std::size_t> nodes_;
  std::vector<double> coords_;
  std::vector<double> values_;
  std::vector<double> sqnorms_;
  double max_abs_value_ = 0.0;
  double max_sqnorm_ = 0.0;
  double max_abs_coord_ = 0.0;
  std::vector<std::size_t> lookup_;  // grid node -> position, or npos
};

/// Smallest opening A in [0, cap] of a paraboloid touching u from below at
/// the node at position `pos`: p . (x - y) <= u(y) - u(x) + A |x - y|^2 / 2
/// for every y in the set. +inf when no A <= cap works. `warm` carries
/// active rows between neighboring calls.
double theta_lower_at(const ConstraintSet& cs, std::size_t pos, const ContactOptions& opt,
                      std::vector<std::size_t>* warm = nullptr);
/// Two-sided cubic contact constant: some (p, M) with
/// |u(y) - u(x) + p . (x - y) + (x - y) . M (x - y)| <= A |x - y|^3 / 6.
double psi_at(const ConstraintSet& cs, std::size_t pos, const ContactOptions& opt,
              std::vector<std::size_t>* warm = nullptr);

/// Feasibility of the touching systems for a fixed opening A.
bool theta_feasible(const ConstraintSet& cs, std::size_t pos, double A, std::uint64_t seed);
bool psi_feasible(const ConstraintSet& cs, std::size_t pos, double A, std::uint64_t seed);

/// Single-node conveniences over the grid domain.
double theta_lower(const GridFn& u, std::size_t node, const ContactOptions& opt = {});
double theta_upper(const GridFn& u, std::size_t node, const ContactOptions& opt = {});
double theta(const GridFn& u, std::size_t node, const ContactOptions& opt = {});
double psi(const GridFn& u, std::size_t node, const ContactOptions& opt = {});
/// (sum_i Theta(d_i u)(x)^2)^{1/2} with central-difference partials.
double psi_bound_via_gradient(const GridFn& u, std::size_t node, const ContactOptions& opt = {});

GridFn negate(const GridFn& u);

struct FieldOptions {
  ContactOptions contact;
  bool theta = true;
  bool theta_upper = true;  // false leaves theta_upper and theta as NaN
  bool psi = false;
  bool psi_bound = false;
};

/// Per-node curvature values on the inner region; NaN off the region,
/// +inf where the cap was reached.
struct CurvatureField {
  GridPtr grid;
  std::vector<std::uint8_t> inner;
  double cap = kDefaultCap;
  std::vector<double> theta_lower;
  std::vector<double> theta_upper;
  std::vector<double> theta;
  std::vector<double> psi;
  std::vector<double> psi_bound;

  std::vector<std::size_t> inner_nodes() const;
  /// Values of one column restricted to the inner region, in node order.
  static std::vector<double> restrict(const std::vector<double>& column, const std::vector<std::uint8_t>& mask);
};

/// Constraint domain = all domain nodes of u's grid.
CurvatureField curvature_field(const GridFn& u, std::span<const std::uint8_t> inner, const FieldOptions& opt = {});

void write_curvature_csv(const std::string& path, const CurvatureField& field);

}  // namespace pareg

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pareg/symmat.hpp"

namespace pareg {

inline constexpr int kMaxGridDim = 3;

using Point = std::array<double, kMaxGridDim>;
using Index = std::array<int, kMaxGridDim>;

enum class DomainShape { ball, cube };

struct Domain {
  DomainShape shape = DomainShape::ball;
  double radius = 1.0;  // ball radius, or cube half-side

  bool contains(const Point& x, int dim) const;
};

/// Uniform grid on [-L, L]^d (optionally shifted by `offset`) with spacing
/// h = L / n and (2n + 1)^d nodes. Node storage is lexicographic in the
/// multi-index with the first index slowest.
class Grid {
 public:
  Grid(int dim, int n, double half_width, Domain domain, Point offset = {});

  int dim() const { return dim_; }
  int n() const { return n_; }
  int side() const { return 2 * n_ + 1; }
  double half_width() const { return half_width_; }
  double h() const { return h_; }
  const Domain& domain() const { return domain_; }
  const Point& offset() const { return offset_; }
  std::size_t size() const { return size_; }

  Index multi_index(std::size_t k) const;
  std::size_t linear_index(const Index& idx) const;
  Point coord(std::size_t k) const;
  double norm(std::size_t k) const;

  /// Linear index of idx(k) + shift when it lies inside the box.
  std::optional<std::size_t> neighbor(std::size_t k, const Index& shift) const;

  bool in_domain(std::size_t k) const { return domain_mask_[k] != 0; }
  /// Domain nodes with an axis neighbor outside the domain (or the box).
  bool on_boundary(std::size_t k) const { return boundary_mask_[k] != 0; }
  const std::vector<std::uint8_t>& domain_mask() const { return domain_mask_; }
  const std::vector<std::uint8_t>& boundary_mask() const { return boundary_mask_; }
  const std::vector<std::size_t>& domain_nodes() const { return domain_nodes_; }

  /// Domain nodes with |x| <= r (ball) or max|x_i| <= r (cube).
  std::vector<std::uint8_t> region_mask(DomainShape shape, double r) const;

  /// Nearest node to x (not necessarily in the domain).
  std::size_t nearest_node(const Point& x) const;

 private:
  int dim_;
  int n_;
  double half_width_;
  double h_;
  Domain domain_;
  Point offset_;
  std::size_t size_;
  std::array<std::size_t, kMaxGridDim> stride_{};
  std::vector<std::uint8_t> domain_mask_;
  std::vector<std::uint8_t> boundary_mask_;
  std::vector<std::size_t> domain_nodes_;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr make_grid(int dim, int n, double half_width, Domain domain, Point offset = {});

/// Scalar field on the nodes of a grid. Values outside the domain may be
/// NaN; values on domain nodes are finite.
struct GridFn {
  GridPtr grid;
  std::vector<double> values;

  double operator[](std::size_t k) const { return values[k]; }
  double& operator[](std::size_t k) { return values[k]; }
  /// max |value| over domain nodes.
  double sup_abs() const;
};

using PointFunction = std::function<double(const Point&)>;

/// Evaluates f at every node of the box. Non-finite values at domain nodes
/// raise InputError; elsewhere they are stored as NaN.
GridFn sample(const PointFunction& f, GridPtr grid);

/// Central differences, second-order one-sided at the box faces.
std::vector<GridFn> fd_gradient(const GridFn& u);

struct HessianField {
  GridPtr grid;
  std::vector<SymMat> values;
  std::vector<std::uint8_t> valid;  // node has all axis and diagonal neighbors
};

/// Central second differences (mixed terms from the four diagonal nodes).
HessianField fd_hessian(const GridFn& u);

struct ConvexEnvelope {
  GridFn envelope;
  std::vector<std::uint8_t> contact;  // envelope >= w - tol_contact
  double tol_contact = 0.0;
};

/// Largest convex minorant of w restricted to `nodes` (defaults to the
/// domain), evaluated node by node as a max-affine LP.
ConvexEnvelope convex_envelope(const GridFn& w, std::span<const std::size_t> nodes = {},
                               int threads = 1);

struct AbpResult {
  double constant = 0.0;      // C_meas, +inf when the contact integral vanishes
  double sup_neg = 0.0;       // sup u^-
  double rhs_norm = 0.0;      // || f^- ||_{L^d(contact set)}
  std::size_t contact_nodes = 0;
};

/// Measured ABP constant for P^+(D^2 u) >= f in B_R, u >= 0 on the first
/// node layer outside B_R.
/// The grid must cover B_{2R}; u is extended by zero outside B_R.
AbpResult abp_check(const GridFn& u, const GridFn& f, double R, int threads = 1);

/// CSV with header i1..id,x1..xd,<columns>, domain nodes in storage order.
void write_grid_csv(const std::string& path, const Grid& grid,
                    const std::vector<std::string>& columns,
                    const std::vector<const std::vector<double>*>& data);
void write_gridfn_csv(const std::string& path, const GridFn& u);
/// JSON sidecar with d, n, L, h, domain and offset.
std::string grid_metadata_json(const Grid& grid);
/// Reads values written by write_gridfn_csv onto `grid` (NaN where absent).
GridFn read_gridfn_csv(const std::string& path, GridPtr grid);

/// Shortest round-trip decimal form; "inf"/"-inf"/"nan" for non-finite.
std::string format_double(double v);

}  // namespace pareg

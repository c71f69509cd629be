#include "pareg/contact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pareg/lp.hpp"
#include "pareg/parallel.hpp"

namespace pareg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kNpos = static_cast<std::size_t>(-1);
constexpr double kScanSlack = 1e-10;
constexpr std::size_t kBlock = 32;

std::uint64_t node_seed(std::uint64_t salt, std::size_t node) { return mix64(salt + 0x9E3779B97F4A7C15ULL * (node + 1)); }

int packed_size(int d) { return d * (d + 1) / 2; }

// Coefficients of x . M x in the packed upper-triangle unknowns of M.
void quad_features(const double* dl, int d, double* out) {
  int k = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) out[k++] = i == j ? dl[i] * dl[i] : 2.0 * dl[i] * dl[j];
  }
}

double capped(double a, double cap) { return a >= cap * (1.0 - 1e-12) ? kInf : std::max(0.0, a); }

double bisect(double cap, double tol, const auto& feasible) {
  if (!feasible(cap)) return kInf;
  if (feasible(0.0)) return 0.0;
  double lo = 0.0;
  double hi = cap;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  // Feasibility is monotone in A; a larger opening must stay feasible.
  if (!feasible(std::min(cap, hi + tol))) throw NumericalError("touching LP: feasibility not monotone in A");
  return hi;
}

template <int D>
void screen_rows_fixed(const ConstraintSet& cs, const double* q, double half_a, double c, double tau,
                       std::vector<std::size_t>& out) {
  const std::size_t m = cs.size();
  const double* y = cs.coord(0);
  for (std::size_t i = 0; i < m; ++i) {
    double s = cs.value(i) + half_a * cs.sqnorm(i) + c;
    for (int k = 0; k < D; ++k) s += q[k] * y[i * D + static_cast<std::size_t>(k)];
    if (s < tau) out.push_back(i);
  }
}

void screen_rows(const ConstraintSet& cs, const double* q, double half_a, double c, double tau,
                 std::vector<std::size_t>& out) {
  switch (cs.dim()) {
    case 1: screen_rows_fixed<1>(cs, q, half_a, c, tau, out); break;
    case 2: screen_rows_fixed<2>(cs, q, half_a, c, tau, out); break;
    default: screen_rows_fixed<3>(cs, q, half_a, c, tau, out); break;
  }
}

// Solves on the rows near pos and leaves the tight rows in `active`, so the
// full-set solve starts from a locally optimal working set.
void solve_local(const ConstraintSet& cs, std::size_t pos, int radius, const auto& test, int n, const auto& row,
                 std::span<const double> fixed, std::span<const double> cost, std::vector<std::size_t>& active,
                 std::uint64_t seed) {
  if (radius <= 0) return;
  std::vector<std::size_t> rows;
  cs.window(pos, radius, rows);
  auto scan = [&](const double* z, Violators& out) {
    for (std::size_t i : rows) test(i, z, out);
  };
  std::vector<std::size_t> ws = active;
  if (minimize_working_set(n, row, scan, fixed, cost, ws, seed).feasible) active = std::move(ws);
}

}  // namespace

ConstraintSet::ConstraintSet(const GridFn& u, std::span<const std::uint8_t> mask) {
  const Grid& g = *u.grid;
  grid_ = u.grid;
  dim_ = g.dim();
  lookup_.assign(g.size(), kNpos);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const bool in = mask.empty() ? g.in_domain(k) : (mask[k] != 0);
    if (!in) continue;
    const double v = u.values[k];
    if (!std::isfinite(v)) throw InputError("touching LP: non-finite value at node " + std::to_string(k));
    lookup_[k] = nodes_.size();
    nodes_.push_back(k);
    const Point x = g.coord(k);
    double sq = 0.0;
    for (int i = 0; i < dim_; ++i) {
      const double xi = x[static_cast<std::size_t>(i)];
      coords_.push_back(xi);
      sq += xi * xi;
      max_abs_coord_ = std::max(max_abs_coord_, std::abs(xi));
    }
    values_.push_back(v);
    sqnorms_.push_back(sq);
    max_abs_value_ = std::max(max_abs_value_, std::abs(v));
    max_sqnorm_ = std::max(max_sqnorm_, sq);
  }
}

std::size_t ConstraintSet::position(std::size_t node) const {
  if (node >= lookup_.size() || lookup_[node] == kNpos) {
    throw InputError("node " + std::to_string(node) + " is outside the constraint domain");
  }
  return lookup_[node];
}

void ConstraintSet::window(std::size_t pos, int radius, std::vector<std::size_t>& out) const {
  out.clear();
  const Grid& g = *grid_;
  const Index c = g.multi_index(nodes_[pos]);
  Index lo{}, hi{}, idx{};
  for (int k = 0; k < dim_; ++k) {
    lo[k] = std::max(0, c[k] - radius);
    hi[k] = std::min(g.side() - 1, c[k] + radius);
  }
  idx = lo;
  // Odometer over the box, last index fastest, matching storage order.
  while (true) {
    const std::size_t at = lookup_[g.linear_index(idx)];
    if (at != kNpos) out.push_back(at);
    int k = dim_ - 1;
    while (k >= 0 && idx[k] == hi[k]) {
      idx[k] = lo[k];
      --k;
    }
    if (k < 0) break;
    ++idx[k];
  }
}

ConstraintSet ConstraintSet::negated() const {
  ConstraintSet out = *this;
  for (double& v : out.values_) v = -v;
  return out;
}

bool theta_feasible(const ConstraintSet& cs, std::size_t pos, double A, std::uint64_t seed) {
  const int d = cs.dim();
  const double* x = cs.coord(pos);
  const double ux = cs.value(pos);
  auto row = [&](std::size_t i, double* a) {
    const double* y = cs.coord(i);
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) {
      a[k] = x[k] - y[k];
      r2 += a[k] * a[k];
    }
    return cs.value(i) - ux + 0.5 * A * r2;
  };
  auto scan = make_row_scan(d, cs.size(), row, kScanSlack);
  std::vector<std::size_t> active;
  return minimize_working_set(d, row, scan, {}, {}, active, seed).feasible;
}

double theta_lower_at(const ConstraintSet& cs, std::size_t pos, const ContactOptions& opt,
                      std::vector<std::size_t>* warm) {
  const int d = cs.dim();
  const std::uint64_t seed = node_seed(0x7E7A, cs.node(pos));
  if (opt.method == ContactMethod::bisection) {
    std::uint64_t probe = 0;
    return bisect(opt.cap, opt.bisection_tol(),
                  [&](double A) { return theta_feasible(cs, pos, A, seed + probe++); });
  }
  const double* x = cs.coord(pos);
  const double ux = cs.value(pos);
  // z = (p, A); row y: p . (x - y) - A |x - y|^2 / 2 <= u(y) - u(x).
  auto row = [&](std::size_t i, double* a) {
    const double* y = cs.coord(i);
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) {
      a[k] = x[k] - y[k];
      r2 += a[k] * a[k];
    }
    a[d] = -0.5 * r2;
    return cs.value(i) - ux;
  };
  auto test = [&](std::size_t i, const double* z, Violators& out) {
    const double* y = cs.coord(i);
    double lin = 0.0;
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const double dl = x[k] - y[k];
      lin += z[k] * dl;
      r2 += dl * dl;
    }
    const double par = 0.5 * z[d] * r2;
    double excess = 0.0;
    if (row_violated(lin - par, cs.value(i) - ux, std::abs(lin) + par, kScanSlack, &excess)) out.emplace_back(excess, i);
  };
  std::vector<std::size_t> cand;
  auto scan = [&](const double* z, Violators& out) {
    const double A = z[d];
    // Slack of row y expanded as u(y) + A|y|^2/2 + q . y + c; only rows whose
    // expanded slack falls below its rounding bound get the exact test.
    double q[kMaxGridDim] = {};
    double c = -ux;
    double qabs = 0.0;
    for (int k = 0; k < d; ++k) {
      q[k] = z[k] - A * x[k];
      c += -z[k] * x[k] + 0.5 * A * x[k] * x[k];
      qabs += std::abs(q[k]);
    }
    const double tau = 1e-12 * (1.0 + cs.max_abs_value() + 0.5 * std::abs(A) * cs.max_sqnorm() +
                                qabs * cs.max_abs_coord() + std::abs(c));
    cand.clear();
    screen_rows(cs, q, 0.5 * A, c, tau, cand);
    for (std::size_t i : cand) test(i, z, out);
  };
  std::vector<double> fx(2 * static_cast<std::size_t>(d + 2), 0.0);
  fx[static_cast<std::size_t>(d)] = -1.0;  // -A <= 0
  fx[static_cast<std::size_t>(d + 2 + d)] = 1.0;  // A <= cap
  fx[static_cast<std::size_t>(2 * d + 3)] = opt.cap;
  std::vector<double> cost(static_cast<std::size_t>(d + 1), 0.0);
  cost[static_cast<std::size_t>(d)] = 1.0;
  std::vector<std::size_t> local;
  std::vector<std::size_t>& active = warm ? *warm : local;
  solve_local(cs, pos, opt.local_window, test, d + 1, row, fx, cost, active, seed);
  const LPResult res = minimize_working_set(d + 1, row, scan, fx, cost, active, seed);
  if (!res.feasible) return kInf;
  return capped(res.x[static_cast<std::size_t>(d)], opt.cap);
}

bool psi_feasible(const ConstraintSet& cs, std::size_t pos, double A, std::uint64_t seed) {
  const int d = cs.dim();
  const int n = d + packed_size(d);
  const double* x = cs.coord(pos);
  const double ux = cs.value(pos);
  auto row = [&](std::size_t i, double* a) {
    const double* y = cs.coord(i / 2);
    const double s = (i % 2 == 0) ? 1.0 : -1.0;
    double dl[kMaxGridDim];
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) {
      dl[k] = x[k] - y[k];
      r2 += dl[k] * dl[k];
    }
    for (int k = 0; k < d; ++k) a[k] = s * dl[k];
    quad_features(dl, d, a + d);
    for (int k = d; k < n; ++k) a[k] *= s;
    const double cub = A * r2 * std::sqrt(r2) / 6.0;
    return cub + s * (ux - cs.value(i / 2));
  };
  auto scan = make_row_scan(n, 2 * cs.size(), row, kScanSlack);
  std::vector<std::size_t> active;
  return minimize_working_set(n, row, scan, {}, {}, active, seed).feasible;
}

double psi_at(const ConstraintSet& cs, std::size_t pos, const ContactOptions& opt, std::vector<std::size_t>* warm) {
  const int d = cs.dim();
  const int q = packed_size(d);
  const int n = d + q + 1;
  const std::uint64_t seed = node_seed(0x9517, cs.node(pos));
  if (opt.method == ContactMethod::bisection) {
    std::uint64_t probe = 0;
    return bisect(opt.cap, opt.bisection_tol(), [&](double A) { return psi_feasible(cs, pos, A, seed + probe++); });
  }
  const double* x = cs.coord(pos);
  const double ux = cs.value(pos);
  const std::size_t m = cs.size();
  // z = (p, M packed, A). Rows 2i and 2i + 1 bound s = u(y) - u(x) + p.dl + dl.M dl
  // from above and below by A |dl|^3 / 6.
  auto row = [&](std::size_t i, double* a) {
    const double* y = cs.coord(i / 2);
    const double s = (i % 2 == 0) ? 1.0 : -1.0;
    double dl[kMaxGridDim];
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) {
      dl[k] = x[k] - y[k];
      r2 += dl[k] * dl[k];
    }
    for (int k = 0; k < d; ++k) a[k] = s * dl[k];
    quad_features(dl, d, a + d);
    for (int k = d; k < d + q; ++k) a[k] *= s;
    a[d + q] = -r2 * std::sqrt(r2) / 6.0;
    return s * (ux - cs.value(i / 2));
  };
  auto test = [&](std::size_t i, const double* z, Violators& out) {
    const double* y = cs.coord(i);
    double dl[kMaxGridDim];
    double r2 = 0.0;
    double lin = 0.0;
    for (int k = 0; k < d; ++k) {
      dl[k] = x[k] - y[k];
      r2 += dl[k] * dl[k];
      lin += z[k] * dl[k];
    }
    double quad = 0.0;
    int c = d;
    for (int a = 0; a < d; ++a) {
      for (int b = a; b < d; ++b) quad += (a == b ? 1.0 : 2.0) * z[c++] * dl[a] * dl[b];
    }
    const double cub = z[d + q] * r2 * std::sqrt(r2) / 6.0;
    const double du = cs.value(i) - ux;
    const double abs_terms = std::abs(lin) + std::abs(quad) + cub;
    double excess = 0.0;
    if (row_violated(lin + quad - cub, -du, abs_terms, kScanSlack, &excess)) out.emplace_back(excess, 2 * i);
    if (row_violated(-lin - quad - cub, du, abs_terms, kScanSlack, &excess)) out.emplace_back(excess, 2 * i + 1);
  };
  auto scan = [&](const double* z, Violators& out) {
    for (std::size_t i = 0; i < m; ++i) test(i, z, out);
  };
  const std::size_t st = static_cast<std::size_t>(n + 1);
  std::vector<double> fx(2 * st, 0.0);
  fx[static_cast<std::size_t>(n - 1)] = -1.0;  // -A <= 0
  fx[st + static_cast<std::size_t>(n - 1)] = 1.0;  // A <= cap
  fx[st + static_cast<std::size_t>(n)] = opt.cap;
  std::vector<double> cost(static_cast<std::size_t>(n), 0.0);
  cost[static_cast<std::size_t>(n - 1)] = 1.0;
  std::vector<std::size_t> local;
  std::vector<std::size_t>& active = warm ? *warm : local;
  solve_local(cs, pos, opt.local_window, test, n, row, fx, cost, active, seed);
  const LPResult res = minimize_working_set(n, row, scan, fx, cost, active, seed);
  if (!res.feasible) return kInf;
  return capped(res.x[static_cast<std::size_t>(n - 1)], opt.cap);
}

GridFn negate(const GridFn& u) {
  GridFn out = u;
  for (double& v : out.values) v = -v;
  return out;
}

double theta_lower(const GridFn& u, std::size_t node, const ContactOptions& opt) {
  const ConstraintSet cs(u);
  return theta_lower_at(cs, cs.position(node), opt);
}

double theta_upper(const GridFn& u, std::size_t node, const ContactOptions& opt) {
  const ConstraintSet cs = ConstraintSet(u).negated();
  return theta_lower_at(cs, cs.position(node), opt);
}

double theta(const GridFn& u, std::size_t node, const ContactOptions& opt) {
  return std::max(theta_lower(u, node, opt), theta_upper(u, node, opt));
}

double psi(const GridFn& u, std::size_t node, const ContactOptions& opt) {
  const ConstraintSet cs(u);
  return psi_at(cs, cs.position(node), opt);
}

double psi_bound_via_gradient(const GridFn& u, std::size_t node, const ContactOptions& opt) {
  double s = 0.0;
  for (const GridFn& g : fd_gradient(u)) {
    const double t = theta(g, node, opt);
    if (std::isinf(t)) return kInf;
    s += t * t;
  }
  return std::sqrt(s);
}

std::vector<std::size_t> CurvatureField::inner_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < inner.size(); ++k) {
    if (inner[k]) out.push_back(k);
  }
  return out;
}

std::vector<double> CurvatureField::restrict(const std::vector<double>& column, const std::vector<std::uint8_t>& mask) {
  std::vector<double> out;
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (mask[k]) out.push_back(column[k]);
  }
  return out;
}

namespace {

// Runs f(cs, pos, warm) over the inner nodes in fixed blocks; warm starts
// never cross block boundaries, so results do not depend on threads.
void for_inner(const std::vector<std::size_t>& nodes, const ConstraintSet& cs, int threads, std::vector<double>& out,
               const auto& f) {
  parallel_blocks(nodes.size(), kBlock, threads, [&](std::size_t b, std::size_t e) {
    std::vector<std::size_t> warm;
    for (std::size_t r = b; r < e; ++r) out[nodes[r]] = f(cs, cs.position(nodes[r]), &warm);
  });
}

}  // namespace

CurvatureField curvature_field(const GridFn& u, std::span<const std::uint8_t> inner, const FieldOptions& opt) {
  const Grid& g = *u.grid;
  CurvatureField field;
  field.grid = u.grid;
  field.cap = opt.contact.cap;
  field.inner.assign(g.size(), 0);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const bool in = inner.empty() ? g.in_domain(k) : inner[k] != 0;
    if (in && !g.in_domain(k)) throw InputError("inner region must lie inside the domain");
    field.inner[k] = in ? 1 : 0;
  }
  const auto nodes = field.inner_nodes();
  const std::vector<double> blank(g.size(), kNaN);
  field.theta_lower = field.theta_upper = field.theta = field.psi = field.psi_bound = blank;
  const int threads = resolve_threads(opt.contact.threads);
  const ConstraintSet lower(u);

  auto theta_fn = [&](const ConstraintSet& cs, std::size_t pos, std::vector<std::size_t>* warm) {
    return theta_lower_at(cs, pos, opt.contact, warm);
  };
  if (opt.theta) {
    for_inner(nodes, lower, threads, field.theta_lower, theta_fn);
    if (opt.theta_upper) {
      const ConstraintSet upper = lower.negated();
      for_inner(nodes, upper, threads, field.theta_upper, theta_fn);
      for (std::size_t k : nodes) field.theta[k] = std::max(field.theta_lower[k], field.theta_upper[k]);
    }
  }
  if (opt.psi) {
    for_inner(nodes, lower, threads, field.psi,
              [&](const ConstraintSet& cs, std::size_t pos, std::vector<std::size_t>* warm) {
                return psi_at(cs, pos, opt.contact, warm);
              });
  }
  if (opt.psi_bound) {
    std::vector<double> acc(g.size(), 0.0);
    std::vector<double> tl(g.size(), kNaN);
    std::vector<double> tu(g.size(), kNaN);
    for (const GridFn& gi : fd_gradient(u)) {
      const ConstraintSet lo(gi);
      const ConstraintSet up = lo.negated();
      for_inner(nodes, lo, threads, tl, theta_fn);
      for_inner(nodes, up, threads, tu, theta_fn);
      for (std::size_t k : nodes) {
        const double t = std::max(tl[k], tu[k]);
        acc[k] += t * t;
      }
    }
    for (std::size_t k : nodes) field.psi_bound[k] = std::sqrt(acc[k]);
  }
  return field;
}

void write_curvature_csv(const std::string& path, const CurvatureField& f) {
  const Grid& g = *f.grid;
  std::vector<double> cl(g.size(), 0.0);
  std::vector<double> cu(g.size(), 0.0);
  std::vector<double> cp(g.size(), 0.0);
  std::vector<double> in(g.size(), 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) {
    cl[k] = std::isinf(f.theta_lower[k]) ? 1.0 : 0.0;
    cu[k] = std::isinf(f.theta_upper[k]) ? 1.0 : 0.0;
    cp[k] = std::isinf(f.psi[k]) ? 1.0 : 0.0;
    in[k] = f.inner[k];
  }
  write_grid_csv(path, g,
                 {"inner", "theta_lower", "theta_upper", "theta", "psi", "psi_bound", "capped_lower", "capped_upper",
                  "capped_psi"},
                 {&in, &f.theta_lower, &f.theta_upper, &f.theta, &f.psi, &f.psi_bound, &cl, &cu, &cp});
}

}  // namespace pareg

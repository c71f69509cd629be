#include "pareg/counterexample.hpp"

#include <algorithm>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <limits>

namespace pareg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double planar_norm(const Point& x) { return std::hypot(x[0], x[1]); }

}  // namespace

void CounterexampleParams::validate() const {
  ell.validate();
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InputError("counterexample: alpha must be > 0");
  if (!(R > 0.0) || !std::isfinite(R)) throw InputError("counterexample: R must be > 0");
}

bool CounterexampleParams::pde_admissible() const { return alpha <= ell.ratio() - 1.0 + 1e-12; }

double counterexample_u(const CounterexampleParams& p, double r) {
  if (!(r > 0.0)) throw InputError("counterexample_u: singular at the center (|x| = 0)");
  if (r >= p.R) return 0.0;
  const double a = p.alpha;
  return std::pow(p.R, a + 2.0) * std::pow(r, -a) + 0.5 * a * r * r - (1.0 + 0.5 * a) * p.R * p.R;
}

double counterexample_u(const CounterexampleParams& p, const Point& x) { return counterexample_u(p, planar_norm(x)); }

double counterexample_du(const CounterexampleParams& p, double r) {
  if (!(r > 0.0)) throw InputError("counterexample_du: singular at the center (|x| = 0)");
  if (r >= p.R) return 0.0;
  const double a = p.alpha;
  return a * r - a * std::pow(p.R, a + 2.0) * std::pow(r, -a - 1.0);
}

std::pair<double, double> counterexample_hessian_eigs(const CounterexampleParams& p, double r) {
  if (!(r > 0.0 && r < p.R)) throw InputError("counterexample_hessian_eigs: need 0 < |x| < R");
  const double a = p.alpha;
  const double s = a * std::pow(r, -a - 2.0);
  const double Ra = std::pow(p.R, a + 2.0);
  const double ra = std::pow(r, a + 2.0);
  return {-s * (Ra - ra), s * (ra + (a + 1.0) * Ra)};
}

EpruneqReport verify_epruneq(const CounterexampleParams& p, const Grid& grid) {
  p.validate();
  if (!p.pde_admissible()) {
    throw InputError("verify_epruneq: requires 0 < alpha <= Lambda/lambda - 1 (alpha = " + format_double(p.alpha) +
                     ", Lambda/lambda = " + format_double(p.ell.ratio()) + ")");
  }
  EpruneqReport rep;
  rep.bound = -2.0 * p.ell.Lambda * p.alpha;
  rep.min_margin = std::numeric_limits<double>::infinity();
  rep.min_margin_inside = std::numeric_limits<double>::infinity();
  const int d = grid.dim();
  for (std::size_t k : grid.domain_nodes()) {
    const double r = planar_norm(grid.coord(k));
    if (r == 0.0) continue;
    std::vector<double> eig(static_cast<std::size_t>(d), 0.0);
    if (r < p.R) {
      const auto [em, ep] = counterexample_hessian_eigs(p, r);
      eig[0] = em;
      if (d > 1) eig[1] = ep;
    }
    const double margin = pucci(SymMat::diagonal(eig), p.ell, PucciSign::plus) - rep.bound;
    ++rep.nodes;
    rep.min_margin = std::min(rep.min_margin, margin);
    if (r < p.R) {
      ++rep.inside;
      rep.min_margin_inside = std::min(rep.min_margin_inside, margin);
    }
    if (margin < 0.0) ++rep.violations;
  }
  return rep;
}

double clamp_radius(const CounterexampleParams& p) {
  p.validate();
  const double k = p.ell.lambda / (p.ell.Lambda * p.alpha);
  auto f = [&](double r) { return k * counterexample_u(p, r) - 1.0; };
  double lo = 0.5 * p.R;
  while (f(lo) <= 0.0) {
    lo *= 0.5;
    if (lo < 1e-300) throw NumericalError("clamp_radius: clamp level not reached");
  }
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(f, lo, p.R, f(lo), f(p.R), boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (r.first + r.second);
}

GridPtr counterexample_grid(int dim, int n) {
  if (dim < 2 || dim > kMaxGridDim) throw InputError("counterexample_grid: dimension must be 2 or 3");
  if (n < 2) throw InputError("counterexample_grid: n must be >= 2");
  const double shrink = 1.0 - std::sqrt(static_cast<double>(dim)) / (2.0 * n);
  const double L = (1.0 + 1e-12) / shrink;
  const double h = L / n;
  Point offset{};
  for (int i = 0; i < dim; ++i) offset[static_cast<std::size_t>(i)] = 0.5 * h;
  return make_grid(dim, n, L, Domain{DomainShape::ball, 1.0}, offset);
}

GridFn counterexample_v(const CounterexampleParams& p, GridPtr grid) {
  p.validate();
  const Grid& g = *grid;
  const double k = p.ell.lambda / (p.ell.Lambda * p.alpha);
  const double cell = 2.0 * p.R;
  GridFn v{grid, std::vector<double>(g.size(), kNaN)};
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Point x = g.coord(n);
    double s = 0.0;
    const int i0 = static_cast<int>(std::ceil((x[0] - p.R) / cell));
    const int i1 = static_cast<int>(std::floor((x[0] + p.R) / cell));
    const int j0 = static_cast<int>(std::ceil((x[1] - p.R) / cell));
    const int j1 = static_cast<int>(std::floor((x[1] + p.R) / cell));
    for (int i = i0; i <= i1; ++i) {
      for (int j = j0; j <= j1; ++j) {
        const double r = std::hypot(x[0] - cell * i, x[1] - cell * j);
        if (r >= p.R) continue;
        if (r <= 1e-9 * g.h()) {
          throw InputError("counterexample_v: node " + std::to_string(n) +
                           " coincides with a lattice center; shift the grid by h/2");
        }
        s += std::min(1.0, k * counterexample_u(p, r));
      }
    }
    double r2 = 0.0;
    for (int i = 0; i < g.dim(); ++i) r2 += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    v.values[n] = s - r2;
  }
  return v;
}

GridFn lift_dummy(const GridFn& planar, GridPtr grid3) {
  const Grid& g2 = *planar.grid;
  const Grid& g3 = *grid3;
  if (g2.dim() != 2 || g3.dim() != 3) throw InputError("lift_dummy: expects a planar field and a 3-d grid");
  if (g2.n() != g3.n() || g2.h() != g3.h() || g2.offset()[0] != g3.offset()[0] || g2.offset()[1] != g3.offset()[1]) {
    throw InputError("lift_dummy: grids must share n, h and the planar offset");
  }
  GridFn out{grid3, std::vector<double>(g3.size(), kNaN)};
  for (std::size_t k = 0; k < g3.size(); ++k) {
    const Index idx = g3.multi_index(k);
    out.values[k] = planar.values[g2.linear_index({idx[0], idx[1], 0})];
  }
  return out;
}

LepsilonReport lepsilon_growth(const CounterexampleParams& p, double epsilon, std::span<const double> R_list,
                               const LepsilonOptions& opt) {
  p.validate();
  const double ratio = p.ell.ratio();
  if (!(epsilon > 0.0) || !((p.alpha + 2.0) * epsilon > 2.0 * (1.0 + 1e-12)) ||
      !((ratio + 1.0) * epsilon > 2.0 * (1.0 + 1e-12))) {
    throw InputError("lepsilon_growth: blow-up regime requires (alpha + 2) eps > 2 and (Lambda/lambda + 1) eps > 2 (alpha = " +
                     format_double(p.alpha) + ", eps = " + format_double(epsilon) + ", Lambda/lambda = " +
                     format_double(ratio) + ")");
  }
  if (R_list.size() < 2) throw InputError("lepsilon_growth: need >= 2 radii");
  for (std::size_t i = 1; i < R_list.size(); ++i) {
    if (!(R_list[i] < R_list[i - 1])) throw InputError("lepsilon_growth: R_list must be strictly decreasing");
  }
  const GridPtr grid = counterexample_grid(2, opt.n);
  const Grid& g = *grid;
  for (double R : R_list) {
    if (R < 4.0 * g.h()) {
      throw InputError("lepsilon_growth: R = " + format_double(R) + " is below 4h = " + format_double(4.0 * g.h()) +
                       "; raise n");
    }
  }
  LepsilonReport rep;
  rep.alpha = p.alpha;
  rep.epsilon = epsilon;
  rep.ell = p.ell;
  rep.n = opt.n;
  rep.predicted_slope = 2.0 * (2.0 - (p.alpha + 2.0) * epsilon) / p.alpha;
  rep.conjectured_epsilon = 2.0 / (ratio + 1.0);
  const auto inner = g.region_mask(DomainShape::ball, 0.5);
  FieldOptions fo;
  fo.contact = opt.contact;
  fo.theta_upper = false;
  const double hd = std::pow(g.h(), g.dim());
  std::vector<double> lx;
  std::vector<double> ly;
  for (double R : R_list) {
    CounterexampleParams q = p;
    q.R = R;
    const GridFn v = counterexample_v(q, grid);
    CurvatureField field = curvature_field(v, inner, fo);
    LepsilonRow row;
    row.R = R;
    row.clamp_radius = clamp_radius(q);
    const auto vals = CurvatureField::restrict(field.theta_lower, field.inner);
    for (double t : vals) {
      if (std::isinf(t)) {
        ++row.capped;
        t = field.cap;
      }
      row.integral += std::pow(t, epsilon) * hd;
    }
    row.growth = rep.rows.empty() ? kNaN : row.integral / rep.rows.back().integral;
    try {
      row.tail = tail_fit(vals, v.sup_abs(), 1.0, field.cap);
      row.tail_ok = true;
    } catch (const InsufficientTail& e) {
      row.tail_error = e.what();
    }
    lx.push_back(std::log(R));
    ly.push_back(std::log(row.integral));
    rep.rows.push_back(std::move(row));
    if (opt.fields) opt.fields->push_back(std::move(field));
  }
  rep.slope = fit_line(lx, ly).first;
  return rep;
}

}  // namespace pareg

#include "pareg/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "pareg/solver.hpp"

namespace pareg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("fit_line: need >= 2 matching points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InputError("fit_line: abscissae are all equal");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

SurvivalCurve survival_curve(std::span<const double> values, double t_lo, double t_hi, int points_per_decade) {
  if (!(t_lo > 0.0) || !(t_hi > t_lo)) throw InputError("survival_curve: need 0 < t_lo < t_hi");
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted) {
    if (std::isnan(v)) throw InputError("survival_curve: NaN value");
  }
  std::sort(sorted.begin(), sorted.end());
  SurvivalCurve c;
  c.samples = sorted.size();
  const double decades = std::log10(t_hi) - std::log10(t_lo);
  const int steps = static_cast<int>(std::ceil(decades * points_per_decade - 1e-9));
  for (int j = 0; j <= steps; ++j) {
    const double t = j == steps ? t_hi : t_lo * std::pow(10.0, static_cast<double>(j) / points_per_decade);
    const auto above = static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t));
    c.t.push_back(t);
    c.survival.push_back(sorted.empty() ? 0.0 : above / static_cast<double>(sorted.size()));
  }
  return c;
}

TailFit tail_fit(std::span<const double> values, double sup_u, double t0, double cap) {
  if (values.empty()) throw InputError("tail_fit: no values");
  if (!(t0 > 0.0) || !(sup_u >= 0.0)) throw InputError("tail_fit: need t0 > 0 and sup_u >= 0");
  // A vanishing field is measured from t0 itself.
  const double t_lo = sup_u > 0.0 ? t0 * sup_u : t0;
  if (!(t_lo < cap)) throw InputError("tail_fit: t0 * sup_u must be below the cap");
  TailFit fit;
  fit.curve = survival_curve(values, t_lo, cap);
  const double n = static_cast<double>(values.size());
  std::vector<double> lx;
  std::vector<double> ly;
  bool reached_zero = false;
  for (std::size_t j = 0; j < fit.curve.t.size(); ++j) {
    const double s = fit.curve.survival[j];
    if (s == 0.0) reached_zero = true;
    if (s >= 20.0 / n && s <= 0.5) {
      lx.push_back(std::log(fit.curve.t[j]));
      ly.push_back(std::log(s));
    }
  }
  const bool usable = lx.size() >= 5 && lx.back() - lx.front() >= std::log(10.0) - 1e-12;
  if (!usable) {
    if (reached_zero) {
      fit.bounded = true;
      fit.epsilon_hat = kInf;
      fit.points = lx.size();
      return fit;
    }
    throw InsufficientTail("insufficient tail: " + std::to_string(lx.size()) +
                               " usable survival points (need >= 5 spanning one decade)",
                           fit.curve);
  }
  const auto [slope, icept] = fit_line(lx, ly);
  fit.epsilon_hat = std::max(0.0, -slope);
  fit.constant_hat = std::exp(icept);
  fit.t_min = std::exp(lx.front());
  fit.t_max = std::exp(lx.back());
  fit.points = lx.size();
  for (std::size_t j = 0; j < lx.size(); ++j) fit.residual = std::max(fit.residual, std::abs(ly[j] - (icept + slope * lx[j])));
  return fit;
}

MeasureDecayReport measure_decay_check(std::span<const double> values, double M, double sigma,
                                       std::span<const double> t_list) {
  if (values.empty()) throw InputError("measure_decay_check: empty region");
  if (!(M > 1.0) || !(sigma > 0.0 && sigma < 1.0)) throw InputError("measure_decay_check: need M > 1 and 0 < sigma < 1");
  for (std::size_t i = 1; i < t_list.size(); ++i) {
    if (!(t_list[i] > t_list[i - 1])) throw InputError("measure_decay_check: t_list must be increasing");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  auto above = [&](double t) {
    return static_cast<std::size_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t));
  };
  MeasureDecayReport rep;
  rep.M = M;
  rep.sigma = sigma;
  for (double t : t_list) {
    DecayRow row{t, above(t), above(M * t), false};
    row.pass = static_cast<double>(row.above_Mt) <= (1.0 - sigma) * static_cast<double>(row.above_t);
    rep.all_pass = rep.all_pass && row.pass;
    rep.rows.push_back(row);
  }
  rep.frontier_M = {1.5, 2.0, 4.0, 8.0, 16.0, 32.0};
  if (std::find(rep.frontier_M.begin(), rep.frontier_M.end(), M) == rep.frontier_M.end()) {
    rep.frontier_M.insert(std::upper_bound(rep.frontier_M.begin(), rep.frontier_M.end(), M), M);
  }
  for (double m : rep.frontier_M) {
    double best = 1.0;
    for (double t : t_list) {
      const std::size_t a = above(t);
      if (a > 0) best = std::min(best, 1.0 - static_cast<double>(above(m * t)) / static_cast<double>(a));
    }
    rep.frontier_sigma.push_back(best);
  }
  return rep;
}

std::size_t CubeMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

namespace {

struct CubeLevel {
  int cells = 0;  // cubes per axis
  std::vector<std::size_t> d_count;
  std::vector<std::size_t> not_e;
};

std::size_t cell_index(const std::array<int, 3>& c, int cells, int dim) {
  std::size_t k = 0;
  for (int i = 0; i < dim; ++i) k = k * static_cast<std::size_t>(cells) + static_cast<std::size_t>(c[static_cast<std::size_t>(i)]);
  return k;
}

std::array<int, 3> cell_coords(std::size_t k, int cells, int dim) {
  std::array<int, 3> c{};
  for (int i = dim - 1; i >= 0; --i) {
    c[static_cast<std::size_t>(i)] = static_cast<int>(k % static_cast<std::size_t>(cells));
    k /= static_cast<std::size_t>(cells);
  }
  return c;
}

std::size_t cube_volume(int side, int dim) {
  std::size_t v = 1;
  for (int i = 0; i < dim; ++i) v *= static_cast<std::size_t>(side);
  return v;
}

void validate_mask(const CubeMask& m, const char* name) {
  if (m.dim < 1 || m.dim > 3) throw InputError(std::string(name) + ": dimension must be 1..3");
  if (!is_pow2(m.side)) throw InputError(std::string(name) + ": side must be a power of two");
  if (m.bits.size() != cube_volume(m.side, m.dim)) throw InputError(std::string(name) + ": size does not match side^dim");
}

}  // namespace

CzResult cz_check(const CubeMask& D, const CubeMask& E, double delta) {
  validate_mask(D, "D");
  validate_mask(E, "E");
  if (D.dim != E.dim || D.side != E.side) throw InputError("cz_check: D and E live on different grids");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("cz_check: delta must lie in (0, 1)");
  for (std::size_t k = 0; k < D.bits.size(); ++k) {
    if (D.bits[k] && !E.bits[k]) throw InputError("cz_check: D is not a subset of E");
  }
  const int dim = D.dim;
  CzResult res;
  res.d_count = D.count();
  res.e_count = E.count();
  res.conclusion = static_cast<double>(res.d_count) <= delta * static_cast<double>(res.e_count);
  if (static_cast<double>(res.d_count) > delta * static_cast<double>(cube_volume(D.side, dim))) {
    res.failed_hypothesis = "|D| <= delta |Q_1|";
    return res;
  }
  // Finest level: one cube per node; coarser levels aggregate 2^dim children.
  CubeLevel level{D.side, {}, {}};
  level.d_count.resize(D.bits.size());
  level.not_e.resize(D.bits.size());
  for (std::size_t k = 0; k < D.bits.size(); ++k) {
    level.d_count[k] = D.bits[k] ? 1 : 0;
    level.not_e[k] = E.bits[k] ? 0 : 1;
  }
  int cube_side = 1;
  while (true) {
    const std::size_t vol = cube_volume(cube_side, dim);
    const int cells = level.cells;
    for (std::size_t q = 0; q < level.d_count.size(); ++q) {
      if (static_cast<double>(level.d_count[q]) < delta * static_cast<double>(vol)) continue;
      const auto c = cell_coords(q, cells, dim);
      std::size_t missing = 0;
      std::array<int, 3> off{-1, -1, -1};
      for (int i = dim; i < 3; ++i) off[static_cast<std::size_t>(i)] = 0;
      while (true) {
        std::array<int, 3> nb{};
        bool inside = true;
        for (int i = 0; i < dim; ++i) {
          nb[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i)] + off[static_cast<std::size_t>(i)];
          inside = inside && nb[static_cast<std::size_t>(i)] >= 0 && nb[static_cast<std::size_t>(i)] < cells;
        }
        if (inside) missing += level.not_e[cell_index(nb, cells, dim)];
        int i = 0;
        while (i < dim && off[static_cast<std::size_t>(i)] == 1) off[static_cast<std::size_t>(i++)] = -1;
        if (i == dim) break;
        ++off[static_cast<std::size_t>(i)];
      }
      if (missing > 0) {
        res.failed_hypothesis = "dilation: cube of side " + std::to_string(cube_side) + " at cell " + std::to_string(q) +
                                " has density >= delta but its threefold dilation leaves E";
        return res;
      }
    }
    if (cells == 1) break;
    CubeLevel up{cells / 2, std::vector<std::size_t>(cube_volume(cells / 2, dim), 0),
                 std::vector<std::size_t>(cube_volume(cells / 2, dim), 0)};
    for (std::size_t q = 0; q < level.d_count.size(); ++q) {
      auto c = cell_coords(q, cells, dim);
      for (int i = 0; i < dim; ++i) c[static_cast<std::size_t>(i)] /= 2;
      const std::size_t p = cell_index(c, up.cells, dim);
      up.d_count[p] += level.d_count[q];
      up.not_e[p] += level.not_e[q];
    }
    level = std::move(up);
    cube_side *= 2;
  }
  res.hypotheses_hold = true;
  return res;
}

std::pair<CubeMask, CubeMask> cz_instance(int dim, int side, double delta, CounterRng& rng) {
  if (dim < 1 || dim > 3 || !is_pow2(side) || side < 4) throw InputError("cz_instance: need dim 1..3 and side a power of two >= 4");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("cz_instance: delta must lie in (0, 1)");
  const std::size_t vol = cube_volume(side, dim);
  CubeMask D{dim, side, std::vector<std::uint8_t>(vol, 0)};
  CubeMask E{dim, side, std::vector<std::uint8_t>(vol, 0)};
  std::vector<std::uint8_t> used(vol, 0);
  int levels = 0;
  while ((1 << levels) < side) ++levels;
  const int attempts = 1 + static_cast<int>(rng.below(8));
  auto for_box = [&](const std::array<int, 3>& lo, const std::array<int, 3>& hi, auto&& fn) {
    std::array<int, 3> c = lo;
    for (int i = dim; i < 3; ++i) c[static_cast<std::size_t>(i)] = 0;
    while (true) {
      fn(cell_index(c, side, dim));
      int i = dim - 1;
      while (i >= 0 && c[static_cast<std::size_t>(i)] == hi[static_cast<std::size_t>(i)] - 1) {
        c[static_cast<std::size_t>(i)] = lo[static_cast<std::size_t>(i)];
        --i;
      }
      if (i < 0) break;
      ++c[static_cast<std::size_t>(i)];
    }
  };
  for (int a = 0; a < attempts; ++a) {
    const int s = side >> (1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(levels - 1))));
    std::array<int, 3> lo{};
    std::array<int, 3> hi{};
    for (int i = 0; i < dim; ++i) {
      lo[static_cast<std::size_t>(i)] = s * static_cast<int>(rng.below(static_cast<std::uint64_t>(side / s)));
      hi[static_cast<std::size_t>(i)] = lo[static_cast<std::size_t>(i)] + s;
    }
    bool free = true;
    for_box(lo, hi, [&](std::size_t k) { free = free && !used[k]; });
    if (!free) continue;
    for_box(lo, hi, [&](std::size_t k) { used[k] = 1; });
    std::array<int, 3> elo{};
    std::array<int, 3> ehi{};
    std::array<int, 3> mlo{};
    std::array<int, 3> mhi{};
    for (int i = 0; i < dim; ++i) {
      const auto u = static_cast<std::size_t>(i);
      elo[u] = std::max(0, lo[u] - s);
      ehi[u] = std::min(side, hi[u] + s);
      mlo[u] = lo[u] + s / 3;
      mhi[u] = std::max(mlo[u] + 1, hi[u] - s / 3);
    }
    for_box(elo, ehi, [&](std::size_t k) { E.bits[k] = 1; });
    std::vector<std::size_t> middle;
    for_box(mlo, mhi, [&](std::size_t k) { middle.push_back(k); });
    // Strictly below a delta fraction of the cube.
    const auto limit = static_cast<std::size_t>(std::ceil(delta * static_cast<double>(cube_volume(s, dim)))) - 1;
    const std::size_t take = std::min(middle.size(), static_cast<std::size_t>(rng.below(limit + 1)));
    shuffle(std::span<std::size_t>(middle), rng);
    for (std::size_t j = 0; j < take; ++j) D.bits[middle[j]] = 1;
  }
  return {D, E};
}

double Quadratic::operator()(const Point& x) const {
  const int d = C.dim();
  double v = c;
  for (int i = 0; i < d; ++i) v += b[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
  return v + 0.5 * C.quad_form(std::span<const double>(x.data(), static_cast<std::size_t>(d)));
}

std::pair<double, double> flatness_correction(const Operator& F, const SymMat& C) {
  const int d = C.dim();
  const SymMat id = SymMat::identity(d);
  auto g = [&](double a) { return F(C + (2.0 * a) * id); };
  const double g0 = g(0.0);
  if (g0 == 0.0) return {0.0, 0.0};
  const double bound = std::abs(g0) / (2.0 * F.ellipticity().lambda * d) * (1.0 + 1e-9) + 1e-300;
  const double glo = g(-bound);
  const double ghi = g(bound);
  // F(C + 2aI) decreases in a with slope in [-2 Lambda d, -2 lambda d].
  if (glo < 0.0 || ghi > 0.0) throw NumericalError("flatness correction: root not bracketed; operator is not uniformly elliptic");
  double a = 0.0;
  if (glo == 0.0) {
    a = -bound;
  } else if (ghi == 0.0) {
    a = bound;
  } else {
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(g, -bound, bound, glo, ghi,
                                                     boost::math::tools::eps_tolerance<double>(52), iters);
    a = std::abs(g(r.first)) <= std::abs(g(r.second)) ? r.first : r.second;
  }
  return {a, std::abs(g(a))};
}

FlatnessTrace flatness_iterate(const GridFn& u, const Operator& F, const FlatnessOptions& opt) {
  const Grid& g = *u.grid;
  const int d = g.dim();
  if (F.dim() != d) throw InputError("flatness_iterate: operator and grid dimensions differ");
  if (!(opt.eta > 0.0 && opt.eta < 1.0)) throw InputError("flatness_iterate: eta must lie in (0, 1)");
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw InputError("flatness_iterate: alpha must lie in (0, 1)");
  if (opt.kmax < 1) throw InputError("flatness_iterate: kmax must be >= 1");
  const auto& nodes = g.domain_nodes();
  FlatnessTrace tr;
  tr.eta = opt.eta;
  tr.alpha = opt.alpha;
  tr.target = std::pow(opt.eta, 2.0 + opt.alpha);
  for (std::size_t k : nodes) {
    if (g.norm(k) <= 1.0 + 1e-12) tr.delta = std::max(tr.delta, std::abs(u.values[k]));
  }
  if (!(tr.delta <= opt.delta0)) {
    tr.hypothesis_met = false;
    tr.warnings.push_back("flatness hypothesis not met: sup|u| = " + format_double(tr.delta) + " > delta0 = " +
                          format_double(opt.delta0));
  }
  const double min_radius = 4.0 * g.h();
  Quadratic P{0.0, std::vector<double>(static_cast<std::size_t>(d), 0.0), SymMat(d)};
  const int q = d * (d + 1) / 2;
  const int nb = 1 + d + q;
  for (int k = 0; k <= opt.kmax; ++k) {
    const double rho = std::pow(opt.eta, k);
    if (rho < min_radius * (1.0 - 1e-12)) {
      tr.truncated = true;
      tr.warnings.push_back("scale " + std::to_string(k) + " (radius " + format_double(rho) +
                            ") is below 4h; trace truncated");
      break;
    }
    FlatnessScale sc;
    sc.k = k;
    sc.radius = rho;
    sc.P = P;
    for (std::size_t n : nodes) {
      if (g.norm(n) <= rho * (1.0 + 1e-12)) sc.error = std::max(sc.error, std::abs(u.values[n] - P(g.coord(n))));
    }
    sc.ratio = k == 0 ? kNaN : sc.error / tr.scales.back().error;
    if (k > 0 && !(sc.ratio <= opt.ratio_slack * tr.target)) tr.contracts = false;
    const double next = rho * opt.eta;
    if (k == opt.kmax || next < min_radius * (1.0 - 1e-12)) {
      if (k < opt.kmax) {
        tr.truncated = true;
        tr.warnings.push_back("scale " + std::to_string(k + 1) + " (radius " + format_double(next) +
                              ") is below 4h; trace truncated");
      }
      tr.scales.push_back(sc);
      break;
    }
    // Rescaled remainder w(y) = (u - P_k)(eta^k y) / eta^{2k} on |y| <= eta.
    std::vector<std::size_t> fit;
    for (std::size_t n : nodes) {
      if (g.norm(n) <= next * (1.0 + 1e-12)) fit.push_back(n);
    }
    if (static_cast<int>(fit.size()) < 2 * nb) throw NumericalError("flatness_iterate: too few nodes for the quadratic fit");
    Eigen::MatrixXd A(static_cast<Eigen::Index>(fit.size()), nb);
    Eigen::VectorXd w(static_cast<Eigen::Index>(fit.size()));
    for (std::size_t r = 0; r < fit.size(); ++r) {
      const Point x = g.coord(fit[r]);
      const auto row = static_cast<Eigen::Index>(r);
      double y[kMaxGridDim];
      for (int i = 0; i < d; ++i) y[i] = x[static_cast<std::size_t>(i)] / rho;
      A(row, 0) = 1.0;
      for (int i = 0; i < d; ++i) A(row, 1 + i) = y[i];
      int c = 1 + d;
      for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) A(row, c++) = i == j ? 0.5 * y[i] * y[i] : y[i] * y[j];
      }
      w(row) = (u.values[fit[r]] - P(x)) / (rho * rho);
    }
    const Eigen::VectorXd coef = A.colPivHouseholderQr().solve(w);
    SymMat Ct(d);
    int c = 1 + d;
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) Ct.set(i, j, coef(c++));
    }
    const auto [a, resid] = flatness_correction(F.translated(P.C), Ct);
    const double bound = std::abs(F.translated(P.C)(Ct)) / (2.0 * F.ellipticity().lambda * d);
    if (std::abs(a) > bound * (1.0 + 1e-9) + 1e-300) throw NumericalError("flatness correction exceeds its a priori bound");
    sc.a = a;
    sc.correction_residual = resid;
    sc.fit_nodes = fit.size();
    tr.scales.push_back(sc);
    P.c += rho * rho * coef(0);
    for (int i = 0; i < d; ++i) P.b[static_cast<std::size_t>(i)] += rho * coef(1 + i);
    P.C += Ct + (2.0 * a) * SymMat::identity(d);
  }
  return tr;
}

CalibrationResult calibrate_constants(const std::vector<Operator>& family, int trials, std::uint64_t seed,
                                      const CalibrationOptions& opt) {
  if (trials < 1) throw InputError("calibrate_constants: trials must be >= 1");
  if (family.empty()) throw InputError("calibrate_constants: empty operator family");
  if (opt.levels < 1 || !(opt.delta_max > 0.0)) throw InputError("calibrate_constants: bad search range");
  CalibrationResult res;
  res.eta_hat = opt.eta;
  for (int j = 0; j < opt.levels; ++j) res.searched.push_back(opt.delta_max * std::ldexp(1.0, -j));
  const int d = family.front().dim();
  const auto grid = make_grid(d, opt.n, 1.0, Domain{DomainShape::ball, 1.0});
  FlatnessOptions fo;
  fo.eta = opt.eta;
  fo.alpha = opt.alpha;
  fo.delta0 = kInf;
  fo.ratio_slack = opt.ratio_slack;
  fo.kmax = 32;
  std::optional<double> best;
  // Smaller deltas are tried only while larger ones fail.
  for (double delta : res.searched) {
    bool all = true;
    for (std::size_t o = 0; o < family.size(); ++o) {
      const Operator& op = family[o];
      if (op.dim() != d) throw InputError("calibrate_constants: mixed dimensions");
      for (int t = 0; t < trials; ++t) {
        const std::uint64_t s = mix64(seed + 0x9E3779B97F4A7C15ULL * (o * 1000003ULL + static_cast<std::uint64_t>(t) + 1));
        CounterRng rng(s);
        std::vector<double> amp(3);
        std::vector<std::array<double, 3>> freq(3);
        std::vector<double> phase(3);
        for (int m = 0; m < 3; ++m) {
          amp[static_cast<std::size_t>(m)] = rng.uniform(-1, 1);
          for (int i = 0; i < 3; ++i) freq[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)] = rng.uniform(-2, 2);
          phase[static_cast<std::size_t>(m)] = rng.uniform(0, 6.283185307179586);
        }
        GridFn b = sample(
            [&](const Point& x) {
              double v = 0.0;
              for (int m = 0; m < 3; ++m) {
                double arg = phase[static_cast<std::size_t>(m)];
                for (int i = 0; i < d; ++i) arg += freq[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
                v += amp[static_cast<std::size_t>(m)] * std::sin(arg);
              }
              return v;
            },
            grid);
        const double sup = b.sup_abs();
        for (double& v : b.values) v *= sup > 0.0 ? delta / sup : 0.0;
        const DiscreteProblem p{op, grid, Stencil::standard(d), b, Scheme::monotone_frames, 1e-10};
        SolveOptions so;
        so.tol = 1e-10 * (1.0 + delta);
        const SolveResult sol = solve_dirichlet(p, so);
        if (!sol.converged) throw NumericalError("calibrate_constants: solve did not converge");
        const FlatnessTrace tr = flatness_iterate(sol.u, op, fo);
        CalibrationTrial rec{op.name(), s, delta, 0.0, tr.contracts};
        for (const auto& sc : tr.scales) {
          if (sc.k > 0) rec.worst_ratio = std::max(rec.worst_ratio, sc.ratio);
        }
        res.trials.push_back(rec);
        all = all && tr.contracts;
      }
    }
    if (all) {
      best = delta;
      break;
    }
  }
  if (!best) throw NumericalError("calibration failed: no delta in the dyadic range contracts on every trial");
  res.delta0_hat = *best;
  res.delta_alpha_hat = *best / 3.0;
  return res;
}

BoxDimension box_dimension(const Grid& grid, std::span<const std::uint8_t> mask, std::span<const double> scales) {
  if (mask.size() != grid.size()) throw InputError("box_dimension: mask does not match the grid");
  if (scales.size() < 3) throw InputError("box_dimension: need >= 3 scales");
  for (double s : scales) {
    if (!(s >= 2.0 * grid.h() * (1.0 - 1e-12))) throw InputError("box_dimension: scales must be >= 2h");
  }
  BoxDimension out;
  out.scales.assign(scales.begin(), scales.end());
  out.counts.assign(scales.size(), 0);
  const int d = grid.dim();
  Index lo{};
  bool any = false;
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (!mask[k]) continue;
    const Index idx = grid.multi_index(k);
    for (int i = 0; i < d; ++i) {
      const auto u = static_cast<std::size_t>(i);
      lo[u] = any ? std::min(lo[u], idx[u]) : idx[u];
    }
    any = true;
  }
  if (!any) return out;
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t s = 0; s < scales.size(); ++s) {
    std::unordered_set<std::uint64_t> boxes;
    for (std::size_t k = 0; k < mask.size(); ++k) {
      if (!mask[k]) continue;
      const Index idx = grid.multi_index(k);
      std::uint64_t key = 0;
      for (int i = 0; i < d; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const auto b = static_cast<std::uint64_t>(std::floor((idx[u] - lo[u]) * grid.h() / scales[s] + 1e-9));
        key = key * 1000003ULL + b;
      }
      boxes.insert(key);
    }
    out.counts[s] = boxes.size();
    lx.push_back(std::log(scales[s]));
    ly.push_back(std::log(static_cast<double>(boxes.size())));
  }
  out.dim_hat = std::max(0.0, -fit_line(lx, ly).first);
  return out;
}

SingularReport flag_singular(const CurvatureField& field, double r, double delta_alpha, std::span<const double> epsilons) {
  const Grid& g = *field.grid;
  if (!(r > 0.0 && r < 1.0 / 16.0)) throw InputError("flag_singular: r must lie in (0, 1/16)");
  if (r < 4.0 * g.h() * (1.0 - 1e-12)) throw InputError("flag_singular: r must be >= 4h (refine the grid)");
  if (!(delta_alpha > 0.0)) throw InputError("flag_singular: delta_alpha must be > 0");
  const auto nodes = field.inner_nodes();
  for (std::size_t k : nodes) {
    if (std::isnan(field.psi[k])) throw InputError("flag_singular: psi was not computed on the inner region");
  }
  SingularReport rep;
  rep.r = r;
  rep.threshold = delta_alpha / r;
  rep.flagged.assign(g.size(), 0);
  const int d = g.dim();
  const int reach = static_cast<int>(std::floor(r / g.h() + 1e-9));
  std::vector<Index> offsets;
  Index o{};
  for (o[0] = -reach; o[0] <= reach; ++o[0]) {
    for (o[1] = d > 1 ? -reach : 0; o[1] <= (d > 1 ? reach : 0); ++o[1]) {
      for (o[2] = d > 2 ? -reach : 0; o[2] <= (d > 2 ? reach : 0); ++o[2]) {
        const double len = g.h() * std::sqrt(static_cast<double>(o[0] * o[0] + o[1] * o[1] + o[2] * o[2]));
        if (len <= r * (1.0 + 1e-12)) offsets.push_back(o);
      }
    }
  }
  for (std::size_t y : nodes) {
    bool certified = false;
    for (const Index& off : offsets) {
      const auto z = g.neighbor(y, off);
      if (!z || !field.inner[*z]) continue;
      if (field.psi[*z] <= rep.threshold) {
        certified = true;
        break;
      }
    }
    if (!certified) {
      rep.flagged[y] = 1;
      ++rep.flagged_count;
    }
  }
  for (double rho = r; rho <= 2.0 * g.half_width() + 1e-12; rho *= 2.0) rep.scales.push_back(rho);
  while (rep.scales.size() < 3) rep.scales.push_back(rep.scales.back() * 2.0);
  const BoxDimension bd = box_dimension(g, rep.flagged, rep.scales);
  rep.counts = bd.counts;
  rep.box_dimension = bd.dim_hat;
  for (double eps : epsilons) {
    rep.epsilons.push_back(eps);
    rep.products.push_back(static_cast<double>(rep.counts.front()) * std::pow(r, d - eps));
  }
  return rep;
}

}  // namespace pareg

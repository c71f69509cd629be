#include "pareg/grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "pareg/lp.hpp"
#include "pareg/parallel.hpp"

namespace pareg {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

bool Domain::contains(const Point& x, int dim) const {
  const double slack = 1e-12 * (1.0 + radius);
  if (shape == DomainShape::ball) {
    double r2 = 0.0;
    for (int i = 0; i < dim; ++i) r2 += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    return std::sqrt(r2) <= radius + slack;
  }
  for (int i = 0; i < dim; ++i) {
    if (std::abs(x[static_cast<std::size_t>(i)]) > radius + slack) return false;
  }
  return true;
}

Grid::Grid(int dim, int n, double half_width, Domain domain, Point offset)
    : dim_(dim), n_(n), half_width_(half_width), h_(0.0), domain_(domain), offset_(offset), size_(1) {
  if (dim < 1 || dim > kMaxGridDim) {
    throw InputError("grid dimension must be in 1.." + std::to_string(kMaxGridDim));
  }
  if (n < 1) throw InputError("grid resolution n must be >= 1");
  if (!(half_width > 0.0) || !std::isfinite(half_width)) throw InputError("grid half-width must be > 0");
  if (!(domain.radius > 0.0)) throw InputError("domain radius must be > 0");
  h_ = half_width / n;
  for (int i = 0; i < dim; ++i) {
    const double o = offset[static_cast<std::size_t>(i)];
    if (std::abs(o) > h_) throw InputError("grid offset must not exceed one spacing");
    if (domain.radius > half_width - std::abs(o) + 1e-12 * half_width) {
      throw InputError("domain does not fit inside the grid box");
    }
  }
  for (int i = dim - 1; i >= 0; --i) {
    stride_[static_cast<std::size_t>(i)] = size_;
    size_ *= static_cast<std::size_t>(side());
  }
  domain_mask_.assign(size_, 0);
  boundary_mask_.assign(size_, 0);
  for (std::size_t k = 0; k < size_; ++k) {
    if (domain_.contains(coord(k), dim_)) {
      domain_mask_[k] = 1;
      domain_nodes_.push_back(k);
    }
  }
  for (std::size_t k : domain_nodes_) {
    for (int i = 0; i < dim_ && !boundary_mask_[k]; ++i) {
      for (int s : {-1, 1}) {
        Index sh{};
        sh[static_cast<std::size_t>(i)] = s;
        const auto nb = neighbor(k, sh);
        if (!nb || !domain_mask_[*nb]) {
          boundary_mask_[k] = 1;
          break;
        }
      }
    }
  }
}

Index Grid::multi_index(std::size_t k) const {
  Index idx{};
  for (int i = 0; i < dim_; ++i) {
    const auto s = stride_[static_cast<std::size_t>(i)];
    idx[static_cast<std::size_t>(i)] = static_cast<int>(k / s);
    k %= s;
  }
  return idx;
}

std::size_t Grid::linear_index(const Index& idx) const {
  std::size_t k = 0;
  for (int i = 0; i < dim_; ++i) k += static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) * stride_[static_cast<std::size_t>(i)];
  return k;
}

Point Grid::coord(std::size_t k) const {
  const Index idx = multi_index(k);
  Point x{};
  for (int i = 0; i < dim_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    x[u] = -half_width_ + h_ * idx[u] + offset_[u];
  }
  return x;
}

double Grid::norm(std::size_t k) const {
  const Point x = coord(k);
  double s = 0.0;
  for (int i = 0; i < dim_; ++i) s += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
  return std::sqrt(s);
}

std::optional<std::size_t> Grid::neighbor(std::size_t k, const Index& shift) const {
  Index idx = multi_index(k);
  for (int i = 0; i < dim_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    idx[u] += shift[u];
    if (idx[u] < 0 || idx[u] >= side()) return std::nullopt;
  }
  return linear_index(idx);
}

std::vector<std::uint8_t> Grid::region_mask(DomainShape shape, double r) const {
  const Domain region{shape, r};
  std::vector<std::uint8_t> mask(size_, 0);
  for (std::size_t k : domain_nodes_) mask[k] = region.contains(coord(k), dim_) ? 1 : 0;
  return mask;
}

std::size_t Grid::nearest_node(const Point& x) const {
  Index idx{};
  for (int i = 0; i < dim_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const long v = std::lround((x[u] - offset_[u] + half_width_) / h_);
    idx[u] = static_cast<int>(std::clamp<long>(v, 0, side() - 1));
  }
  return linear_index(idx);
}

GridPtr make_grid(int dim, int n, double half_width, Domain domain, Point offset) {
  return std::make_shared<const Grid>(dim, n, half_width, domain, offset);
}

double GridFn::sup_abs() const {
  double s = 0.0;
  for (std::size_t k : grid->domain_nodes()) s = std::max(s, std::abs(values[k]));
  return s;
}

GridFn sample(const PointFunction& f, GridPtr grid) {
  GridFn out{grid, std::vector<double>(grid->size())};
  for (std::size_t k = 0; k < grid->size(); ++k) {
    const double v = f(grid->coord(k));
    if (!std::isfinite(v)) {
      if (grid->in_domain(k)) {
        const Point x = grid->coord(k);
        std::ostringstream os;
        os << "non-finite sample at node " << k << " (x = " << x[0];
        for (int i = 1; i < grid->dim(); ++i) os << ", " << x[static_cast<std::size_t>(i)];
        os << ")";
        throw InputError(os.str());
      }
      out.values[k] = kNaN;
    } else {
      out.values[k] = v;
    }
  }
  return out;
}

std::vector<GridFn> fd_gradient(const GridFn& u) {
  const Grid& g = *u.grid;
  if (g.n() < 2) throw InputError("fd_gradient: resolution too small (n < 2)");
  std::vector<GridFn> out;
  for (int i = 0; i < g.dim(); ++i) {
    GridFn d{u.grid, std::vector<double>(g.size(), kNaN)};
    Index e{};
    e[static_cast<std::size_t>(i)] = 1;
    Index e2{};
    e2[static_cast<std::size_t>(i)] = 2;
    Index me{};
    me[static_cast<std::size_t>(i)] = -1;
    Index me2{};
    me2[static_cast<std::size_t>(i)] = -2;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const auto p = g.neighbor(k, e);
      const auto m = g.neighbor(k, me);
      if (p && m) {
        d.values[k] = (u.values[*p] - u.values[*m]) / (2.0 * g.h());
      } else if (p) {
        const auto p2 = g.neighbor(k, e2);
        d.values[k] = (-3.0 * u.values[k] + 4.0 * u.values[*p] - u.values[*p2]) / (2.0 * g.h());
      } else {
        const auto m2 = g.neighbor(k, me2);
        d.values[k] = (3.0 * u.values[k] - 4.0 * u.values[*m] + u.values[*m2]) / (2.0 * g.h());
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

HessianField fd_hessian(const GridFn& u) {
  const Grid& g = *u.grid;
  const int d = g.dim();
  if (d < 2) throw InputError("fd_hessian requires dimension >= 2");
  if (g.n() < 2) throw InputError("fd_hessian: resolution too small (n < 2)");
  HessianField out{u.grid, std::vector<SymMat>(g.size(), SymMat(d)), std::vector<std::uint8_t>(g.size(), 0)};
  const double h2 = g.h() * g.h();
  for (std::size_t k = 0; k < g.size(); ++k) {
    SymMat m(d);
    bool ok = true;
    for (int i = 0; i < d && ok; ++i) {
      for (int j = i; j < d && ok; ++j) {
        if (i == j) {
          Index e{};
          e[static_cast<std::size_t>(i)] = 1;
          Index me{};
          me[static_cast<std::size_t>(i)] = -1;
          const auto p = g.neighbor(k, e);
          const auto q = g.neighbor(k, me);
          if (!p || !q) {
            ok = false;
            break;
          }
          m.set(i, i, (u.values[*p] - 2.0 * u.values[k] + u.values[*q]) / h2);
        } else {
          double acc = 0.0;
          for (int si : {-1, 1}) {
            for (int sj : {-1, 1}) {
              Index e{};
              e[static_cast<std::size_t>(i)] = si;
              e[static_cast<std::size_t>(j)] = sj;
              const auto p = g.neighbor(k, e);
              if (!p) {
                ok = false;
                break;
              }
              acc += si * sj * u.values[*p];
            }
            if (!ok) break;
          }
          if (ok) m.set(i, j, acc / (4.0 * h2));
        }
      }
    }
    if (ok && m.is_finite()) {
      out.values[k] = m;
      out.valid[k] = 1;
    }
  }
  return out;
}

ConvexEnvelope convex_envelope(const GridFn& w, std::span<const std::size_t> nodes_in, int threads) {
  const Grid& g = *w.grid;
  const int d = g.dim();
  const std::vector<std::size_t> all(nodes_in.empty() ? g.domain_nodes()
                                                      : std::vector<std::size_t>(nodes_in.begin(), nodes_in.end()));
  const std::size_t m = all.size();
  // Node coordinates and values packed for the scans.
  std::vector<double> xs(m * static_cast<std::size_t>(d));
  std::vector<double> ws(m);
  double wmax = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    const Point x = g.coord(all[r]);
    for (int i = 0; i < d; ++i) xs[r * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
    ws[r] = w.values[all[r]];
    if (!std::isfinite(ws[r])) throw InputError("convex_envelope: non-finite value");
    wmax = std::max(wmax, std::abs(ws[r]));
  }

  ConvexEnvelope out;
  out.envelope = GridFn{w.grid, std::vector<double>(g.size(), kNaN)};
  out.contact.assign(g.size(), 0);
  out.tol_contact = 1e-9 * (1.0 + wmax);

  // Variables (q, c): the affine function c + q . (y - x) lies below w.
  const int n = d + 1;
  std::vector<double> cost(static_cast<std::size_t>(n), 0.0);
  cost[static_cast<std::size_t>(d)] = -1.0;
  constexpr std::size_t kBlock = 64;
  parallel_blocks(m, kBlock, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> active;
    for (std::size_t r = begin; r < end; ++r) {
      const double* x = xs.data() + r * static_cast<std::size_t>(d);
      auto row = [&](std::size_t i, double* a) {
        for (int k = 0; k < d; ++k) a[k] = xs[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] - x[k];
        a[d] = 1.0;
        return ws[i];
      };
      auto scan = [&](const double* z, Violators& v) {
        for (std::size_t i = 0; i < m; ++i) {
          const double* y = xs.data() + i * static_cast<std::size_t>(d);
          double lhs = z[d];
          double abs_terms = std::abs(z[d]);
          for (int k = 0; k < d; ++k) {
            const double t = z[k] * (y[k] - x[k]);
            lhs += t;
            abs_terms += std::abs(t);
          }
          double excess = 0.0;
          if (row_violated(lhs, ws[i], abs_terms, 1e-11, &excess)) v.emplace_back(excess, i);
        }
      };
      active.push_back(r);
      const LPResult res = minimize_working_set(n, row, scan, {}, cost, active,
                                                mix64(0xC0111EULL + all[r]));
      if (!res.feasible) throw NumericalError("convex_envelope: infeasible LP at node " + std::to_string(all[r]));
      const double env = res.x[static_cast<std::size_t>(d)];
      out.envelope.values[all[r]] = env;
      out.contact[all[r]] = env >= ws[r] - out.tol_contact ? 1 : 0;
    }
  });
  return out;
}

AbpResult abp_check(const GridFn& u, const GridFn& f, double R, int threads) {
  const Grid& g = *u.grid;
  if (!(R > 0.0)) throw InputError("abp_check: R must be > 0");
  if (f.grid.get() != u.grid.get() && f.grid->size() != g.size()) throw InputError("abp_check: u and f on different grids");
  const double slack = 1e-9 * g.h();
  std::vector<std::size_t> big;    // B_{2R}
  std::vector<std::uint8_t> inside(g.size(), 0);  // B_R
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double r = g.norm(k);
    if (r <= 2.0 * R + slack) big.push_back(k);
    if (r <= R + slack) inside[k] = 1;
  }
  if (g.half_width() * (1.0 + 1e-12) < 2.0 * R) throw InputError("abp_check: grid box must cover B_{2R}");
  double uscale = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (inside[k]) uscale = std::max(uscale, std::abs(u.values[k]));
  }
  // Boundary data lives on the first layer of nodes outside B_R.
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (inside[k]) continue;
    bool edge = false;
    for (int i = 0; i < g.dim() && !edge; ++i) {
      for (int s : {-1, 1}) {
        Index sh{};
        sh[static_cast<std::size_t>(i)] = s;
        const auto nb = g.neighbor(k, sh);
        if (nb && inside[*nb]) edge = true;
      }
    }
    if (edge && u.values[k] < -1e-9 * (1.0 + uscale)) {
      throw InputError("abp_check: u must be >= 0 on the boundary of B_R");
    }
  }

  AbpResult res;
  GridFn w{u.grid, std::vector<double>(g.size(), 0.0)};
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (inside[k]) {
      const double neg = std::max(0.0, -u.values[k]);
      w.values[k] = -neg;
      res.sup_neg = std::max(res.sup_neg, neg);
    }
  }
  if (res.sup_neg == 0.0) return res;
  const ConvexEnvelope env = convex_envelope(w, big, threads);
  const int d = g.dim();
  const double hd = std::pow(g.h(), d);
  double sum = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!inside[k] || !env.contact[k]) continue;
    ++res.contact_nodes;
    const double fneg = std::max(0.0, -f.values[k]);
    sum += std::pow(fneg, d) * hd;
  }
  res.rhs_norm = std::pow(sum, 1.0 / d);
  res.constant = res.rhs_norm > 0.0 ? res.sup_neg / (R * res.rhs_norm) : std::numeric_limits<double>::infinity();
  return res;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

void write_grid_csv(const std::string& path, const Grid& grid, const std::vector<std::string>& columns,
                    const std::vector<const std::vector<double>*>& data) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  const int d = grid.dim();
  for (int i = 1; i <= d; ++i) os << 'i' << i << ',';
  for (int i = 1; i <= d; ++i) os << 'x' << i << ',';
  for (std::size_t c = 0; c < columns.size(); ++c) os << columns[c] << (c + 1 < columns.size() ? "," : "\n");
  for (std::size_t k : grid.domain_nodes()) {
    const Index idx = grid.multi_index(k);
    const Point x = grid.coord(k);
    for (int i = 0; i < d; ++i) os << idx[static_cast<std::size_t>(i)] << ',';
    for (int i = 0; i < d; ++i) os << format_double(x[static_cast<std::size_t>(i)]) << ',';
    for (std::size_t c = 0; c < data.size(); ++c) {
      os << format_double((*data[c])[k]) << (c + 1 < data.size() ? "," : "\n");
    }
  }
  if (!os) throw InputError("write failed: " + path);
}

void write_gridfn_csv(const std::string& path, const GridFn& u) {
  write_grid_csv(path, *u.grid, {"value"}, {&u.values});
}

std::string grid_metadata_json(const Grid& grid) {
  std::ostringstream os;
  os << "{\"d\": " << grid.dim() << ", \"n\": " << grid.n() << ", \"L\": " << format_double(grid.half_width())
     << ", \"h\": " << format_double(grid.h()) << ", \"domain\": {\"shape\": \""
     << (grid.domain().shape == DomainShape::ball ? "ball" : "cube") << "\", \"radius\": "
     << format_double(grid.domain().radius) << "}, \"offset\": [";
  for (int i = 0; i < grid.dim(); ++i) {
    os << (i ? ", " : "") << format_double(grid.offset()[static_cast<std::size_t>(i)]);
  }
  os << "], \"nodes\": " << grid.size() << "}";
  return os.str();
}

GridFn read_gridfn_csv(const std::string& path, GridPtr grid) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read " + path);
  const int d = grid->dim();
  std::string line;
  if (!std::getline(is, line)) throw InputError(path + ": empty CSV");
  GridFn out{grid, std::vector<double>(grid->size(), kNaN)};
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) < 2 * d + 1) {
      throw InputError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(2 * d + 1) + " columns");
    }
    Index idx{};
    try {
      for (int i = 0; i < d; ++i) idx[static_cast<std::size_t>(i)] = std::stoi(cells[static_cast<std::size_t>(i)]);
      for (int i = 0; i < d; ++i) {
        if (idx[static_cast<std::size_t>(i)] < 0 || idx[static_cast<std::size_t>(i)] >= grid->side()) {
          throw InputError("index out of range");
        }
      }
      out.values[grid->linear_index(idx)] = std::stod(cells[static_cast<std::size_t>(2 * d)]);
    } catch (const std::exception& e) {
      throw InputError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (std::size_t k : grid->domain_nodes()) {
    if (!std::isfinite(out.values[k])) throw InputError(path + ": missing or non-finite value at domain node " + std::to_string(k));
  }
  return out;
}

}  // namespace pareg

#include "pareg/lp.hpp"

#include <array>
#include <numeric>

namespace pareg {

namespace {

constexpr double kTol = 1e-12;
constexpr double kZero = 1e-12;

// Scales a row so that max |a_k| = 1; rows with no significant coefficient
// become exact zero rows.
void normalize_row(double* r, int n) {
  double mx = 0.0;
  for (int k = 0; k < n; ++k) mx = std::max(mx, std::abs(r[k]));
  if (mx <= kZero) {
    for (int k = 0; k < n; ++k) r[k] = 0.0;
    return;
  }
  for (int k = 0; k <= n; ++k) r[k] /= mx;
}

bool solve_1d(const double* rows, std::size_t m, double c, double box, double* x) {
  double lo = -box;
  double hi = box;
  for (std::size_t i = 0; i < m; ++i) {
    const double a = rows[2 * i];
    const double b = rows[2 * i + 1];
    if (a == 0.0) {
      if (b < -kTol * (1.0 + std::abs(b))) return false;
      continue;
    }
    if (a > 0.0) {
      hi = std::min(hi, b / a);
    } else {
      lo = std::max(lo, b / a);
    }
  }
  if (lo > hi) {
    if (lo - hi > kTol * (1.0 + std::abs(lo) + std::abs(hi))) return false;
    *x = 0.5 * (lo + hi);
    return true;
  }
  if (c > 0.0) {
    *x = lo;
  } else if (c < 0.0) {
    *x = hi;
  } else {
    *x = std::clamp(0.0, lo, hi);
  }
  return true;
}

// Child row buffers reused across calls, one per recursion depth (indexed
// by the child's variable count).
std::vector<double>& child_buffer(int n) {
  thread_local std::array<std::vector<double>, kLpMaxVars + 1> buffers;
  return buffers[static_cast<std::size_t>(n)];
}

// Rows are normalized; x receives an optimal vertex of the boxed problem.
bool seidel_rec(int n, const double* rows, std::size_t m, const double* c, double box, double* x) {
  if (n == 1) return solve_1d(rows, m, c[0], box, x);
  const std::size_t st = static_cast<std::size_t>(n + 1);
  for (int k = 0; k < n; ++k) x[k] = c[k] > 0.0 ? -box : (c[k] < 0.0 ? box : 0.0);

  std::vector<double>& child = child_buffer(n - 1);
  double child_c[kLpMaxVars];
  double child_x[kLpMaxVars];
  double gamma[kLpMaxVars];
  for (std::size_t i = 0; i < m; ++i) {
    const double* r = rows + i * st;
    double lhs = 0.0;
    double abs_terms = 0.0;
    for (int k = 0; k < n; ++k) {
      lhs += r[k] * x[k];
      abs_terms += std::abs(r[k] * x[k]);
    }
    if (lhs - r[n] <= kTol * (1.0 + std::abs(r[n]) + abs_terms)) continue;

    int j = 0;
    for (int k = 1; k < n; ++k) {
      if (std::abs(r[k]) > std::abs(r[j])) j = k;
    }
    if (std::abs(r[j]) <= kZero) return false;  // violated zero row: b < 0

    // On the hyperplane: x_j = beta + sum_{k != j} gamma_k x_k.
    const double beta = r[n] / r[j];
    for (int k = 0; k < n; ++k) gamma[k] = k == j ? 0.0 : -r[k] / r[j];

    const std::size_t cst = static_cast<std::size_t>(n);  // child stride
    // Every child entry is overwritten below.
    child.resize((i + 2) * cst);
    auto reduce = [&](const double* src, double* dst) {
      int kk = 0;
      for (int k = 0; k < n; ++k) {
        if (k == j) continue;
        dst[kk++] = src[k] + src[j] * gamma[k];
      }
      dst[n - 1] = src[n] - src[j] * beta;
      normalize_row(dst, n - 1);
    };
    {
      // Box rows of the eliminated variable: x_j <= box and -x_j <= box.
      double up[kLpMaxVars + 1] = {};
      double dn[kLpMaxVars + 1] = {};
      up[j] = 1.0;
      up[n] = box;
      dn[j] = -1.0;
      dn[n] = box;
      reduce(up, child.data());
      reduce(dn, child.data() + cst);
    }
    for (std::size_t q = 0; q < i; ++q) reduce(rows + q * st, child.data() + (q + 2) * cst);

    int kk = 0;
    for (int k = 0; k < n; ++k) {
      if (k == j) continue;
      child_c[kk++] = c[k] + c[j] * gamma[k];
    }
    if (!seidel_rec(n - 1, child.data(), i + 2, child_c, box, child_x)) return false;
    double xj = beta;
    kk = 0;
    for (int k = 0; k < n; ++k) {
      if (k == j) continue;
      x[k] = child_x[kk];
      xj += gamma[k] * x[k];
      ++kk;
    }
    x[j] = xj;
  }
  return true;
}

}  // namespace

void LPInstance::add(std::span<const double> a, double b) {
  if (static_cast<int>(a.size()) != n_vars) throw InputError("LPInstance::add: wrong row length");
  rows.insert(rows.end(), a.begin(), a.end());
  rows.push_back(b);
}

LPResult seidel_minimize(int n, std::span<const double> rows, std::span<const double> cost,
                         CounterRng& rng, double box, std::size_t leading) {
  if (n < 1 || n > kLpMaxVars) throw InputError("LP: unsupported variable count " + std::to_string(n));
  const std::size_t st = static_cast<std::size_t>(n + 1);
  if (rows.size() % st != 0) throw InputError("LP: ragged row buffer");
  const std::size_t m = rows.size() / st;

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  leading = std::min(leading, m);
  shuffle(std::span<std::size_t>(order).subspan(leading), rng);
  std::vector<double> work(m * st);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(rows.data() + order[i] * st, st, work.data() + i * st);
    for (std::size_t k = 0; k < st; ++k) {
      if (!std::isfinite(work[i * st + k])) throw InputError("LP: non-finite row data");
    }
    normalize_row(work.data() + i * st, n);
  }
  std::vector<double> c(static_cast<std::size_t>(n), 0.0);
  for (std::size_t k = 0; k < cost.size() && k < c.size(); ++k) c[k] = cost[k];

  LPResult res;
  res.x.assign(static_cast<std::size_t>(n), 0.0);
  res.feasible = seidel_rec(n, work.data(), m, c.data(), box, res.x.data());
  if (res.feasible) {
    res.objective = 0.0;
    for (int k = 0; k < n; ++k) res.objective += c[static_cast<std::size_t>(k)] * res.x[static_cast<std::size_t>(k)];
  }
  return res;
}

namespace detail {
void keep_top(Violators& v, std::size_t k) {
  auto worse = [](const std::pair<double, std::size_t>& a, const std::pair<double, std::size_t>& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  };
  if (v.size() > k) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), worse);
    v.resize(k);
  }
  std::sort(v.begin(), v.end(), worse);
}
}  // namespace detail

LPResult lp_minimize(const LPInstance& inst, std::span<const double> cost, std::uint64_t seed) {
  const int n = inst.n_vars;
  if (n < 1 || n > kLpMaxVars) throw InputError("LP: unsupported variable count " + std::to_string(n));
  const std::size_t st = static_cast<std::size_t>(n + 1);
  const std::size_t m = inst.size();
  if (m <= 4096) {
    CounterRng rng(seed);
    return seidel_minimize(n, inst.rows, cost, rng);
  }
  auto row = [&](std::size_t i, double* a) {
    std::copy_n(inst.rows.data() + i * st, n, a);
    return inst.rows[i * st + static_cast<std::size_t>(n)];
  };
  auto scan = make_row_scan(n, m, row, kTol);
  std::vector<std::size_t> active;
  return minimize_working_set(n, row, scan, {}, cost, active, seed);
}

bool lp_feasible(const LPInstance& inst, std::uint64_t seed) {
  if (inst.size() == 0) return true;
  return lp_minimize(inst, {}, seed).feasible;
}

}  // namespace pareg

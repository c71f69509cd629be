#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "pareg/rng.hpp"
#include "pareg/symmat.hpp"

namespace pareg {

/// Half-space system a_i . z <= b_i, stored row-major with stride n_vars + 1
/// (the offset b_i last).
struct LPInstance {
  int n_vars = 0;
  std::vector<double> rows;

  explicit LPInstance(int n = 0) : n_vars(n) {}
  void add(std::span<const double> a, double b);
  std::size_t size() const { return n_vars > 0 ? rows.size() / static_cast<std::size_t>(n_vars + 1) : 0; }
};

inline constexpr double kLpBox = 1e9;
inline constexpr int kLpMaxVars = 12;

struct LPResult {
  bool feasible = false;
  std::vector<double> x;
  double objective = std::numeric_limits<double>::quiet_NaN();
};

/// Seidel's randomized incremental LP over |z_k| <= box. Minimizes
/// cost . z; ties resolve to the first optimal vertex encountered. The
/// first `leading` rows are inserted first in their given order and the
/// rest in random order; the optimum value does not depend on the order.
LPResult seidel_minimize(int n, std::span<const double> rows, std::span<const double> cost,
                         CounterRng& rng, double box = kLpBox, std::size_t leading = 0);

/// Feasibility within 1e-12 relative slack. Deterministic given seed.
bool lp_feasible(const LPInstance& inst, std::uint64_t seed);
LPResult lp_minimize(const LPInstance& inst, std::span<const double> cost, std::uint64_t seed);

struct WorkingSetOptions {
  std::size_t batch = 0;  // violators added per round, 0 = 16 (n + 1)
  int max_rounds = 2000;
  double box = kLpBox;
  double slack = 1e-10;
};

using Violators = std::vector<std::pair<double, std::size_t>>;

/// Relative violation test shared by all scans: a . z - b exceeds the
/// rounding scale of the row.
inline bool row_violated(double lhs, double b, double abs_terms, double slack, double* excess) {
  const double v = lhs - b;
  if (v <= 0.0) return false;
  if (v <= slack * (1.0 + std::abs(b) + abs_terms)) return false;
  *excess = v / (1.0 + abs_terms);
  return true;
}

namespace detail {
void keep_top(Violators& v, std::size_t k);
}

/// Clarkson-style outer loop: solves on a working set with Seidel, scans
/// all m rows for violators and adds the worst `batch` until none remain.
///   row(i, a) writes the n coefficients of row i and returns its offset.
///   scan(z, out) appends (excess, i) for every violated row.
/// `fixed` rows (stride n + 1) are always present. On entry `active` holds
/// warm-start row indices; on exit it holds the rows tight at the optimum.
/// Infeasibility is only reported from a cold start.
template <class RowFn, class ScanFn>
LPResult minimize_working_set(int n, RowFn&& row, ScanFn&& scan, std::span<const double> fixed,
                              std::span<const double> cost, std::vector<std::size_t>& active,
                              std::uint64_t seed, const WorkingSetOptions& opt = {}) {
  const std::size_t st = static_cast<std::size_t>(n + 1);
  const std::size_t batch = opt.batch ? opt.batch : 16 * st;
  std::vector<std::size_t> ws(active.begin(), active.end());
  std::sort(ws.begin(), ws.end());
  ws.erase(std::unique(ws.begin(), ws.end()), ws.end());
  bool warm = !ws.empty();
  CounterRng rng(seed);
  std::vector<double> buf;
  Violators cand;
  // Rows tight at the previous round's optimum go first: they reproduce that
  // optimum before any new row is inserted.
  std::vector<std::size_t> lead = ws;  // warm rows were tight at a nearby optimum
  std::vector<double> a(static_cast<std::size_t>(n));
  auto is_tight = [&](std::size_t i, const std::vector<double>& x) {
    const double b = row(i, a.data());
    double lhs = 0.0;
    double abs_terms = 0.0;
    for (int k = 0; k < n; ++k) {
      lhs += a[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(k)];
      abs_terms += std::abs(a[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(k)]);
    }
    return std::abs(lhs - b) <= 1e-7 * (1.0 + std::abs(b) + abs_terms);
  };
  for (int round = 0; round < opt.max_rounds; ++round) {
    std::vector<std::size_t> order;
    order.reserve(ws.size());
    for (std::size_t i : lead) order.push_back(i);
    for (std::size_t i : ws) {
      if (!std::binary_search(lead.begin(), lead.end(), i)) order.push_back(i);
    }
    buf.assign(fixed.begin(), fixed.end());
    buf.resize(fixed.size() + order.size() * st);
    for (std::size_t r = 0; r < order.size(); ++r) {
      double* dst = buf.data() + fixed.size() + r * st;
      dst[n] = row(order[r], dst);
    }
    LPResult res = seidel_minimize(n, buf, cost, rng, opt.box, fixed.size() / st + lead.size());
    // Degenerate leading rows can fail the tolerance tests; random order
    // decides.
    if (!res.feasible && !lead.empty()) res = seidel_minimize(n, buf, cost, rng, opt.box);
    if (!res.feasible) {
      // Nearly parallel warm rows can fail the tolerance tests; a cold
      // restart decides infeasibility.
      if (warm) {
        warm = false;
        ws.clear();
        lead.clear();
        rng = CounterRng(seed);
        continue;
      }
      active = ws;
      return res;
    }
    cand.clear();
    scan(res.x.data(), cand);
    detail::keep_top(cand, batch);
    std::size_t added = 0;
    for (const auto& c : cand) {
      auto it = std::lower_bound(ws.begin(), ws.end(), c.second);
      if (it != ws.end() && *it == c.second) continue;
      ws.insert(it, c.second);
      ++added;
    }
    lead.clear();
    for (std::size_t i : ws) {
      if (is_tight(i, res.x)) lead.push_back(i);
    }
    if (added == 0) {
      // Report the working rows that are tight at the optimum.
      active = lead;
      return res;
    }
  }
  throw NumericalError("LP working set did not converge");
}

/// Scan built from a row accessor; O(m n) per call.
template <class RowFn>
auto make_row_scan(int n, std::size_t m, RowFn& row, double slack = 1e-10) {
  return [n, m, &row, slack](const double* z, Violators& out) {
    std::vector<double> a(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < m; ++i) {
      const double b = row(i, a.data());
      double lhs = 0.0;
      double abs_terms = 0.0;
      for (int k = 0; k < n; ++k) {
        lhs += a[static_cast<std::size_t>(k)] * z[k];
        abs_terms += std::abs(a[static_cast<std::size_t>(k)] * z[k]);
      }
      double excess = 0.0;
      if (row_violated(lhs, b, abs_terms, slack, &excess)) out.emplace_back(excess, i);
    }
  };
}

}  // namespace pareg

#include "pareg/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "pareg/analysis.hpp"
#include "pareg/contact.hpp"
#include "pareg/counterexample.hpp"
#include "pareg/parallel.hpp"
#include "pareg/solver.hpp"

namespace pareg {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Output files of one run, all under the same directory.
class Artifacts {
 public:
  Artifacts(std::string dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {}

  std::string path(const std::string& name) {
    const std::string p = (fs::path(dir_) / (command_ + "_" + name)).string();
    paths_.push_back(p);
    return p;
  }

  void text(const std::string& name, const std::string& body) {
    const std::string p = path(name);
    std::ofstream out(p);
    if (!out) throw InputError("cannot write '" + p + "'");
    out << body;
  }

  /// Plain CSV table; doubles in shortest round-trip form.
  void table(const std::string& name, const std::vector<std::string>& header,
             const std::vector<std::vector<double>>& columns) {
    std::string body;
    for (std::size_t c = 0; c < header.size(); ++c) body += (c ? "," : "") + header[c];
    body += "\n";
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < columns.size(); ++c) body += (c ? "," : "") + format_double(columns[c][r]);
      body += "\n";
    }
    text(name, body);
  }

  const std::vector<std::string>& paths() const { return paths_; }

 private:
  std::string dir_;
  std::string command_;
  std::vector<std::string> paths_;
};

/// Raised by a command that produced partial results before a numerical
/// failure; the results still go into the report.
class PartialFailure : public NumericalError {
 public:
  PartialFailure(const std::string& what, Json results) : NumericalError(what), results_(std::move(results)) {}
  const Json& results() const { return results_; }

 private:
  Json results_;
};

struct Context {
  const Json& cfg;
  const RunContext& run;
  std::uint64_t seed;
  Artifacts& out;
};

const Json& params(const Json& cfg) {
  static const Json empty = Json::object();
  if (!cfg.contains("params")) return empty;
  return get_block(cfg, "params");
}

Json stats(const std::vector<double>& v) {
  double lo = kNaN, hi = kNaN, sum = 0.0;
  std::size_t finite = 0, capped = 0;
  for (double x : v) {
    if (std::isnan(x)) continue;
    if (std::isinf(x)) {
      ++capped;
      continue;
    }
    lo = finite ? std::min(lo, x) : x;
    hi = finite ? std::max(hi, x) : x;
    sum += x;
    ++finite;
  }
  return Json{{"count", v.size()}, {"capped", capped}, {"min", json_number(lo)}, {"max", json_number(hi)},
              {"mean", json_number(finite ? sum / static_cast<double>(finite) : kNaN)}};
}

ContactOptions contact_options(const Json& p, const RunContext& run) {
  ContactOptions c;
  c.cap = get_number(p, "cap", kDefaultCap);
  c.method = parse_contact_method(get_string(p, "method", "exact"));
  c.tol_A = get_number(p, "tol_A", 0.0);
  c.local_window = get_int(p, "local_window", c.local_window);
  if (c.local_window < 0) throw InputError("local_window must be >= 0");
  c.threads = run.threads;
  return c;
}

std::vector<std::uint8_t> inner_region(const Grid& g, const Json& p) {
  const double r = get_number(p, "inner_radius", 0.5 * g.domain().radius);
  if (!(r > 0.0)) throw InputError("inner_radius must be > 0");
  return g.region_mask(g.domain().shape, r);
}

DiscreteProblem solve_problem(const Json& cfg, GridPtr grid, std::uint64_t seed) {
  const Json& s = get_block(cfg, "solve");
  const Operator op = parse_operator(get_block(cfg, "operator"), grid->dim(), seed);
  DiscreteProblem p{op, grid, parse_stencil(get_string(s, "stencil", "standard"), grid->dim()),
                    parse_field(get_block(s, "boundary"), grid), parse_scheme(get_string(s, "scheme", "monotone_frames")),
                    get_number(s, "fit_tol", 1e-10)};
  return p;
}

SolveOptions solve_options(const Json& cfg) {
  const Json& s = get_block(cfg, "solve");
  SolveOptions o;
  o.tol = get_number(s, "tol", 1e-8);
  o.max_iters = get_int(s, "max_iters", 200);
  o.method = parse_method(get_string(s, "method", "newton"));
  o.cfl_safety = get_number(s, "cfl_safety", 0.9);
  return o;
}

Json solve_summary(const SolveResult& r) {
  return Json{{"converged", r.converged},
              {"iterations", r.iterations},
              {"residual", json_number(r.residual_history.empty() ? kNaN : r.residual_history.back())},
              {"residual_increases", r.residual_increases},
              {"tau", json_number(r.tau)}};
}

/// The field a pipeline command analyzes: a solve when the config has a
/// "solve" block, else a sampled "function".
GridFn pipeline_field(Context& c, GridPtr grid, Json& info) {
  if (c.cfg.contains("solve")) {
    const DiscreteProblem p = solve_problem(c.cfg, grid, c.seed);
    const SolveResult r = solve_dirichlet(p, solve_options(c.cfg));
    info["solve"] = solve_summary(r);
    if (!r.converged) throw PartialFailure("solve did not converge", info);
    write_gridfn_csv(c.out.path("solution.csv"), r.u);
    return r.u;
  }
  return parse_field(get_block(c.cfg, "function"), grid);
}

Json grid_json(const Grid& g) { return Json::parse(grid_metadata_json(g)); }

Json run_pucci(Context& c) {
  const Json& p = params(c.cfg);
  const int dim = get_int(p, "dim", 2);
  const EllipticityPair ell = parse_ellipticity(p);
  const int samples = get_int(p, "samples", 10000);
  const double scale = get_number(p, "scale", 1.0);
  const double rel_tol = get_number(p, "tolerance", 1e-3);
  std::vector<SymMat> ms;
  if (p.contains("matrices")) {
    for (const auto& m : p.at("matrices")) ms.push_back(parse_symmat(m));
  } else {
    const int count = get_int(p, "count", 100);
    if (count < 1) throw InputError("count must be >= 1");
    CounterRng rng(c.seed);
    for (int i = 0; i < count; ++i) {
      CounterRng r = rng.split(static_cast<std::uint64_t>(i));
      ms.push_back(random_symmat(dim, scale, r));
    }
  }
  const std::size_t m = ms.size();
  std::vector<double> idx(m), norm(m), plus(m), minus(m), brute(m), gap(m), inside(m);
  std::size_t violations = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    idx[i] = static_cast<double>(i);
    norm[i] = ms[i].frobenius_norm();
    plus[i] = pucci(ms[i], ell, PucciSign::plus);
    minus[i] = pucci(ms[i], ell, PucciSign::minus);
    brute[i] = pucci_brute(ms[i], ell, samples, mix64(c.seed + i + 1));
    gap[i] = plus[i] - brute[i];
    const double tol = rel_tol * (1.0 + norm[i]);
    const bool ok = brute[i] <= plus[i] + 1e-12 * (1.0 + norm[i]) && gap[i] <= tol;
    inside[i] = ok ? 1.0 : 0.0;
    if (!ok) ++violations;
    worst = std::max(worst, gap[i] / (1.0 + norm[i]));
  }
  c.out.table("matrices.csv", {"index", "norm", "pucci_plus", "pucci_minus", "brute", "gap", "within"},
              {idx, norm, plus, minus, brute, gap, inside});
  return Json{{"matrices", m},
              {"samples", samples},
              {"ellipticity", {{"lambda", ell.lambda}, {"Lambda", ell.Lambda}}},
              {"violations", violations},
              {"max_relative_gap", worst},
              {"pass", violations == 0}};
}

Json run_solve(Context& c) {
  const GridPtr grid = parse_grid(get_block(c.cfg, "grid"));
  const DiscreteProblem p = solve_problem(c.cfg, grid, c.seed);
  const SolveResult r = solve_dirichlet(p, solve_options(c.cfg));
  Json res = solve_summary(r);
  res["grid"] = grid_json(*grid);
  res["operator"] = p.op.name();
  write_gridfn_csv(c.out.path("solution.csv"), r.u);
  c.out.text("solution.json", grid_metadata_json(*grid) + "\n");
  std::vector<double> it(r.residual_history.size());
  std::iota(it.begin(), it.end(), 0.0);
  c.out.table("residuals.csv", {"iteration", "residual"}, {it, r.residual_history});
  const Json& s = get_block(c.cfg, "solve");
  if (s.contains("exact")) {
    const GridFn exact = sample(parse_function(get_block(s, "exact")), grid);
    const DiscreteOperator dop(p);
    double err = 0.0;
    for (std::size_t k : dop.interior()) err = std::max(err, std::abs(r.u.values[k] - exact.values[k]));
    res["interior_error"] = err;
  }
  if (!r.converged) throw PartialFailure("solve did not converge within max_iters", res);
  return res;
}

Json curvature_run(Context& c, bool want_psi) {
  const Json& p = params(c.cfg);
  const GridPtr grid = parse_grid(get_block(c.cfg, "grid"));
  Json res;
  const GridFn u = pipeline_field(c, grid, res);
  FieldOptions fo;
  fo.contact = contact_options(p, c.run);
  fo.theta = !want_psi || get_bool(p, "theta", false);
  fo.theta_upper = get_bool(p, "upper", true);
  fo.psi = want_psi;
  fo.psi_bound = want_psi && get_bool(p, "psi_bound", false);
  const CurvatureField f = curvature_field(u, inner_region(*grid, p), fo);
  write_curvature_csv(c.out.path("field.csv"), f);
  res["grid"] = grid_json(*grid);
  res["inner_nodes"] = f.inner_nodes().size();
  res["cap"] = f.cap;
  const auto col = [&](const std::vector<double>& v) { return CurvatureField::restrict(v, f.inner); };
  if (fo.theta) {
    res["theta_lower"] = stats(col(f.theta_lower));
    if (fo.theta_upper) {
      res["theta_upper"] = stats(col(f.theta_upper));
      res["theta"] = stats(col(f.theta));
    }
  }
  if (want_psi) res["psi"] = stats(col(f.psi));
  const Json fn = c.cfg.contains("function") ? c.cfg.at("function") : Json();
  if (is_quadratic(fn)) {
    const auto e = eigenvalues(quadratic_matrix(fn));
    const double lo = std::max(0.0, -e.front());
    const double hi = std::max(0.0, e.back());
    Json cf{{"theta_lower", lo}, {"theta_upper", hi}, {"theta", std::max(lo, hi)}, {"psi", 0.0}};
    Json err;
    auto max_err = [&](const std::vector<double>& v, double want) {
      double m = 0.0;
      for (double x : col(v)) m = std::max(m, std::abs(x - want));
      return m;
    };
    if (fo.theta) {
      err["theta_lower"] = json_number(max_err(f.theta_lower, lo));
      if (fo.theta_upper) {
        err["theta_upper"] = json_number(max_err(f.theta_upper, hi));
        err["theta"] = json_number(max_err(f.theta, std::max(lo, hi)));
      }
    }
    if (want_psi) err["psi"] = json_number(max_err(f.psi, 0.0));
    res["closed_form"] = cf;
    res["max_error"] = err;
  }
  if (fo.psi_bound) {
    const double C = get_number(p, "C", 0.0);
    double excess = -std::numeric_limits<double>::infinity();
    std::size_t violations = 0;
    for (std::size_t k : f.inner_nodes()) {
      const double d = (f.psi[k] - f.psi_bound[k]) / grid->h();
      excess = std::max(excess, d);
      if (f.psi[k] > f.psi_bound[k] + C * grid->h()) ++violations;
    }
    res["psi_bound"] = stats(col(f.psi_bound));
    res["bound_check"] = Json{{"C", C}, {"measured_C", json_number(std::max(0.0, excess))}, {"violations", violations}};
  }
  return res;
}

Json run_theta(Context& c) { return curvature_run(c, false); }
Json run_psi(Context& c) { return curvature_run(c, true); }

Json run_tail(Context& c) {
  const Json& p = params(c.cfg);
  const GridPtr grid = parse_grid(get_block(c.cfg, "grid"));
  Json res;
  const GridFn u = pipeline_field(c, grid, res);
  const std::string column = get_string(p, "field", "theta");
  FieldOptions fo;
  fo.contact = contact_options(p, c.run);
  if (column == "theta_lower") {
    fo.theta_upper = false;
  } else if (column == "psi") {
    fo.theta = false;
    fo.psi = true;
  } else if (column != "theta") {
    throw InputError("field must be 'theta', 'theta_lower' or 'psi'");
  }
  const CurvatureField f = curvature_field(u, inner_region(*grid, p), fo);
  write_curvature_csv(c.out.path("field.csv"), f);
  const std::vector<double>& src = column == "theta" ? f.theta : column == "psi" ? f.psi : f.theta_lower;
  const auto vals = CurvatureField::restrict(src, f.inner);
  const double sup = u.sup_abs();
  res["field"] = column;
  res["sup_u"] = sup;
  res["stats"] = stats(vals);
  if (p.contains("decay")) {
    const Json& d = get_block(p, "decay");
    const auto t_list = get_numbers(d, "t_list", {1, 2, 4, 8, 16, 32});
    const MeasureDecayReport md = measure_decay_check(vals, get_number(d, "M", 2.0), get_number(d, "sigma", 0.1), t_list);
    Json rows = Json::array();
    for (const auto& r : md.rows) {
      rows.push_back({{"t", r.t}, {"above_t", r.above_t}, {"above_Mt", r.above_Mt}, {"pass", r.pass}});
    }
    res["decay"] = Json{{"M", md.M}, {"sigma", md.sigma}, {"rows", rows}, {"all_pass", md.all_pass},
                        {"frontier_M", md.frontier_M}, {"frontier_sigma", json_numbers(md.frontier_sigma)}};
  }
  auto write_curve = [&](const SurvivalCurve& s) { c.out.table("survival.csv", {"t", "survival"}, {s.t, s.survival}); };
  try {
    const TailFit t = tail_fit(vals, sup, get_number(p, "t0", 1.0), f.cap);
    write_curve(t.curve);
    res["tail"] = Json{{"epsilon_hat", json_number(t.epsilon_hat)},
                       {"constant_hat", json_number(t.constant_hat)},
                       {"t_min", json_number(t.t_min)},
                       {"t_max", json_number(t.t_max)},
                       {"residual", json_number(t.residual)},
                       {"points", t.points},
                       {"bounded", t.bounded}};
  } catch (const InsufficientTail& e) {
    write_curve(e.curve());
    throw PartialFailure(e.what(), res);
  }
  return res;
}

Json run_abp(Context& c) {
  const Json& p = params(c.cfg);
  const GridPtr grid = parse_grid(get_block(c.cfg, "grid"));
  const double R = get_number(p, "R", 0.5 * grid->half_width());
  const GridFn u = parse_field(get_block(c.cfg, "u"), grid);
  const GridFn f = parse_field(get_block(c.cfg, "f"), grid);
  const AbpResult a = abp_check(u, f, R, c.run.threads);
  GridFn u2 = u, f2 = f;
  for (double& v : u2.values) v *= 2.0;
  for (double& v : f2.values) v *= 2.0;
  const AbpResult b = abp_check(u2, f2, R, c.run.threads);
  return Json{{"R", R},
              {"grid", grid_json(*grid)},
              {"constant", json_number(a.constant)},
              {"sup_neg", a.sup_neg},
              {"rhs_norm", a.rhs_norm},
              {"contact_nodes", a.contact_nodes},
              {"scaled_constant", json_number(b.constant)},
              {"scale_invariant", a.constant == b.constant}};
}

Json run_czcheck(Context& c) {
  const Json& p = params(c.cfg);
  const int dim = get_int(p, "dim", 2);
  const int side = get_int(p, "side", 64);
  const double delta = get_number(p, "delta", 0.25);
  const int count = get_int(p, "instances", 1000);
  if (count < 1) throw InputError("instances must be >= 1");
  const auto n = static_cast<std::size_t>(count);
  std::vector<double> idx(n), dc(n), ec(n), hyp(n), concl(n);
  const CounterRng base(c.seed);
  parallel_blocks(n, 16, c.run.threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      CounterRng rng = base.split(i);
      const auto [D, E] = cz_instance(dim, side, delta, rng);
      const CzResult r = cz_check(D, E, delta);
      idx[i] = static_cast<double>(i);
      dc[i] = static_cast<double>(r.d_count);
      ec[i] = static_cast<double>(r.e_count);
      hyp[i] = r.hypotheses_hold ? 1.0 : 0.0;
      concl[i] = r.conclusion ? 1.0 : 0.0;
    }
  });
  c.out.table("instances.csv", {"index", "d_count", "e_count", "hypotheses_hold", "conclusion"}, {idx, dc, ec, hyp, concl});
  std::size_t hyp_fail = 0, violations = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (hyp[i] == 0.0) ++hyp_fail;
    if (hyp[i] != 0.0 && concl[i] == 0.0) ++violations;
    if (ec[i] > 0) worst = std::max(worst, dc[i] / ec[i]);
  }
  return Json{{"dim", dim},        {"side", side},           {"delta", delta},
              {"instances", count}, {"hypothesis_failures", hyp_fail}, {"conclusion_violations", violations},
              {"max_ratio", worst}, {"pass", violations == 0 && hyp_fail == 0}};
}

Json run_flatness(Context& c) {
  const Json& p = params(c.cfg);
  const GridPtr grid = parse_grid(get_block(c.cfg, "grid"));
  Json res;
  const GridFn u = pipeline_field(c, grid, res);
  const Operator op = parse_operator(get_block(c.cfg, "operator"), grid->dim(), c.seed);
  FlatnessOptions fo;
  fo.eta = get_number(p, "eta", fo.eta);
  fo.alpha = get_number(p, "alpha", fo.alpha);
  fo.kmax = get_int(p, "kmax", fo.kmax);
  fo.delta0 = get_number(p, "delta0", fo.delta0);
  fo.ratio_slack = get_number(p, "ratio_slack", fo.ratio_slack);
  const FlatnessTrace tr = flatness_iterate(u, op, fo);
  std::vector<double> k, radius, error, ratio, a, resid, nodes;
  Json scales = Json::array();
  for (const auto& s : tr.scales) {
    k.push_back(s.k);
    radius.push_back(s.radius);
    error.push_back(s.error);
    ratio.push_back(s.ratio);
    a.push_back(s.a);
    resid.push_back(s.correction_residual);
    nodes.push_back(static_cast<double>(s.fit_nodes));
    scales.push_back({{"k", s.k}, {"radius", s.radius}, {"error", s.error}, {"ratio", json_number(s.ratio)},
                      {"a", s.a}, {"correction_residual", s.correction_residual}, {"fit_nodes", s.fit_nodes},
                      {"P", {{"c", s.P.c}, {"b", s.P.b}, {"C", to_string(s.P.C)}}}});
  }
  c.out.table("trace.csv", {"k", "radius", "error", "ratio", "a", "correction_residual", "fit_nodes"},
              {k, radius, error, ratio, a, resid, nodes});
  double max_resid = 0.0;
  for (double r : resid) max_resid = std::max(max_resid, r);
  res["delta"] = tr.delta;
  res["eta"] = tr.eta;
  res["alpha"] = tr.alpha;
  res["target"] = tr.target;
  res["hypothesis_met"] = tr.hypothesis_met;
  res["truncated"] = tr.truncated;
  res["contracts"] = tr.contracts;
  res["max_correction_residual"] = max_resid;
  res["warnings"] = tr.warnings;
  res["scales"] = scales;
  return res;
}

std::vector<Operator> operator_family(const Json& cfg, int dim, std::uint64_t seed) {
  std::vector<Operator> ops;
  if (cfg.contains("operators")) {
    const Json& list = cfg.at("operators");
    if (!list.is_array() || list.empty()) throw InputError("'operators' must be a nonempty array");
    for (std::size_t i = 0; i < list.size(); ++i) ops.push_back(parse_operator(list[i], dim, mix64(seed + i)));
  } else {
    ops.push_back(parse_operator(get_block(cfg, "operator"), dim, seed));
  }
  return ops;
}

CalibrationOptions calibration_options(const Json& p, const RunContext& run) {
  CalibrationOptions o;
  o.eta = get_number(p, "eta", o.eta);
  o.alpha = get_number(p, "alpha", o.alpha);
  o.n = get_int(p, "n", o.n);
  o.delta_max = get_number(p, "delta_max", o.delta_max);
  o.levels = get_int(p, "levels", o.levels);
  o.ratio_slack = get_number(p, "ratio_slack", o.ratio_slack);
  o.threads = run.threads;
  return o;
}

Json calibration_json(const CalibrationResult& r) {
  return Json{{"delta0_hat", r.delta0_hat},
              {"eta_hat", r.eta_hat},
              {"delta_alpha_hat", r.delta_alpha_hat},
              {"searched", r.searched},
              {"trials", r.trials.size()}};
}

Json run_calibrate(Context& c) {
  const Json& p = params(c.cfg);
  const std::vector<Operator> ops = operator_family(c.cfg, get_int(p, "dim", 2), c.seed);
  const CalibrationResult r = calibrate_constants(ops, get_int(p, "trials", 4), c.seed, calibration_options(p, c.run));
  std::vector<double> op_index, seed_lo, delta, worst, ok;
  for (const auto& t : r.trials) {
    std::size_t o = 0;
    while (o < ops.size() && ops[o].name() != t.op) ++o;
    op_index.push_back(static_cast<double>(o));
    seed_lo.push_back(static_cast<double>(t.seed & 0xffffffffULL));
    delta.push_back(t.delta);
    worst.push_back(t.worst_ratio);
    ok.push_back(t.contracts ? 1.0 : 0.0);
  }
  c.out.table("trials.csv", {"operator", "seed_low32", "delta", "worst_ratio", "contracts"},
              {op_index, seed_lo, delta, worst, ok});
  Json names = Json::array();
  for (const auto& o : ops) names.push_back(o.name());
  Json res = calibration_json(r);
  res["operators"] = names;
  return res;
}

Json run_singular(Context& c) {
  const Json& p = params(c.cfg);
  const GridPtr grid = parse_grid(get_block(c.cfg, "grid"));
  Json res;
  const GridFn u = pipeline_field(c, grid, res);
  double delta_alpha = get_number(p, "delta_alpha", kNaN);
  if (std::isnan(delta_alpha)) {
    const Json cal = p.contains("calibration") ? get_block(p, "calibration") : Json::object();
    const std::vector<Operator> ops = operator_family(c.cfg, grid->dim(), c.seed);
    const CalibrationResult r = calibrate_constants(ops, get_int(cal, "trials", 2), c.seed, calibration_options(cal, c.run));
    res["calibration"] = calibration_json(r);
    delta_alpha = r.delta_alpha_hat;
  }
  FieldOptions fo;
  fo.contact = contact_options(p, c.run);
  fo.theta = false;
  fo.psi = true;
  const CurvatureField f = curvature_field(u, inner_region(*grid, p), fo);
  const SingularReport s = flag_singular(f, get_number(p, "r"), delta_alpha, get_numbers(p, "epsilons", {}));
  std::vector<double> flagged(s.flagged.begin(), s.flagged.end());
  for (std::size_t k = 0; k < flagged.size(); ++k) {
    if (!f.inner[k]) flagged[k] = kNaN;
  }
  write_grid_csv(c.out.path("flags.csv"), *grid, {"psi", "flagged"}, {&f.psi, &flagged});
  std::vector<double> counts(s.counts.begin(), s.counts.end());
  c.out.table("covering.csv", {"scale", "count"}, {s.scales, counts});
  res["r"] = s.r;
  res["delta_alpha"] = delta_alpha;
  res["threshold"] = s.threshold;
  res["flagged_count"] = s.flagged_count;
  res["box_dimension"] = s.box_dimension;
  res["scales"] = s.scales;
  res["counts"] = s.counts;
  res["epsilons"] = s.epsilons;
  res["products"] = s.products;
  res["psi"] = stats(CurvatureField::restrict(f.psi, f.inner));
  return res;
}

Json run_counterexample(Context& c) {
  const Json& p = params(c.cfg);
  CounterexampleParams cp;
  cp.alpha = get_number(p, "alpha", 1.0);
  cp.ell = parse_ellipticity(p);
  const auto Rs = get_numbers(p, "R", {1.0});
  if (Rs.empty()) throw InputError("R must list at least one radius");
  cp.R = Rs.front();
  cp.validate();
  const int n = get_int(p, "n", 128);
  Json res;
  res["alpha"] = cp.alpha;
  res["ellipticity"] = {{"lambda", cp.ell.lambda}, {"Lambda", cp.ell.Lambda}};
  res["pde_admissible"] = cp.pde_admissible();
  const double eps = get_number(p, "epsilon", kNaN);
  if (!std::isnan(eps)) {
    // Validate the regime before any expensive work.
    const double ratio = cp.ell.ratio();
    if (!((cp.alpha + 2.0) * eps > 2.0 * (1.0 + 1e-12)) || !((ratio + 1.0) * eps > 2.0 * (1.0 + 1e-12))) {
      throw InputError("blow-up regime requires (alpha + 2) eps > 2 and (Lambda/lambda + 1) eps > 2 (alpha = " +
                       format_double(cp.alpha) + ", eps = " + format_double(eps) + ", Lambda/lambda = " +
                       format_double(ratio) + ")");
    }
  }
  if (cp.pde_admissible()) {
    // Same offset layout as counterexample_grid, scaled to B_R.
    const double L = cp.R * (1.0 + 1e-12) / (1.0 - std::sqrt(2.0) / (2.0 * n));
    const double h = L / n;
    const GridPtr g = make_grid(2, n, L, Domain{DomainShape::ball, cp.R}, {0.5 * h, 0.5 * h, 0.0});
    const EpruneqReport e = verify_epruneq(cp, *g);
    res["pucci_bound"] = Json{{"R", cp.R},
                              {"bound", e.bound},
                              {"min_margin", json_number(e.min_margin)},
                              {"min_margin_inside", json_number(e.min_margin_inside)},
                              {"nodes", e.nodes},
                              {"inside", e.inside},
                              {"violations", e.violations}};
  }
  const int points = get_int(p, "profile_points", 200);
  std::vector<double> r, u, du, e1, e2, pp;
  for (int i = 1; i < points; ++i) {
    const double x = cp.R * i / points;
    const auto [a, b] = counterexample_hessian_eigs(cp, x);
    r.push_back(x);
    u.push_back(counterexample_u(cp, x));
    du.push_back(counterexample_du(cp, x));
    e1.push_back(a);
    e2.push_back(b);
    const std::vector<double> diag{a, b};
    pp.push_back(pucci(SymMat::diagonal(diag), cp.ell, PucciSign::plus));
  }
  c.out.table("profile.csv", {"r", "u", "du", "eig_min", "eig_max", "pucci_plus"}, {r, u, du, e1, e2, pp});
  res["clamp_radius"] = clamp_radius(cp);
  if (!std::isnan(eps) && Rs.size() >= 2) {
    LepsilonOptions lo;
    lo.n = n;
    lo.contact = contact_options(p, c.run);
    const LepsilonReport rep = lepsilon_growth(cp, eps, Rs, lo);
    std::vector<double> R, integral, growth, rc, capped, eh;
    Json rows = Json::array();
    for (const auto& row : rep.rows) {
      R.push_back(row.R);
      integral.push_back(row.integral);
      growth.push_back(row.growth);
      rc.push_back(row.clamp_radius);
      capped.push_back(static_cast<double>(row.capped));
      eh.push_back(row.tail_ok ? row.tail.epsilon_hat : kNaN);
      Json j{{"R", row.R},          {"integral", row.integral}, {"growth", json_number(row.growth)},
             {"clamp_radius", row.clamp_radius}, {"capped", row.capped}, {"tail_ok", row.tail_ok}};
      if (row.tail_ok) {
        j["epsilon_hat"] = json_number(row.tail.epsilon_hat);
        j["gap_to_conjecture"] = json_number(row.tail.epsilon_hat - rep.conjectured_epsilon);
      } else {
        j["tail_error"] = row.tail_error;
      }
      rows.push_back(j);
    }
    c.out.table("lepsilon.csv", {"R", "integral", "growth", "clamp_radius", "capped", "epsilon_hat"},
                {R, integral, growth, rc, capped, eh});
    bool increasing = true;
    double min_growth = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
      increasing = increasing && rep.rows[i].integral > rep.rows[i - 1].integral;
      min_growth = std::min(min_growth, rep.rows[i].growth);
    }
    res["lepsilon"] = Json{{"epsilon", eps},
                           {"n", n},
                           {"rows", rows},
                           {"slope", rep.slope},
                           {"predicted_slope", rep.predicted_slope},
                           {"conjectured_epsilon", rep.conjectured_epsilon},
                           {"strictly_increasing", increasing},
                           {"min_growth", json_number(min_growth)}};
  }
  return res;
}

using Runner = Json (*)(Context&);

struct Entry {
  CommandInfo info;
  Runner run;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> e{
      {{"pucci", "extremal operators: closed form against sampled sup over admissible coefficient matrices"}, run_pucci},
      {{"solve", "Dirichlet problem F(D^2 u) = 0 with a monotone wide-stencil scheme"}, run_solve},
      {{"theta", "touching-paraboloid curvatures (lower, upper, two-sided) per node"}, run_theta},
      {{"psi", "cubic contact constant per node, optionally against the gradient bound"}, run_psi},
      {{"tail", "power-law fit of the curvature survival function, optional measure decay"}, run_tail},
      {{"abp", "measured maximum-principle constant over the convex-envelope contact set"}, run_abp},
      {{"czcheck", "dyadic cube decomposition bound on generated instances"}, run_czcheck},
      {{"flatness", "quadratic approximation iteration at geometric scales"}, run_flatness},
      {{"calibrate", "empirical flatness threshold over sampled solutions"}, run_calibrate},
      {{"singular", "flags nodes without small cubic contact nearby; covering counts and box dimension"}, run_singular},
      {{"counterexample", "radial bump family: Pucci bound, L^eps growth and tail exponent"}, run_counterexample},
  };
  return e;
}

}  // namespace

const std::vector<CommandInfo>& command_catalog() {
  static const std::vector<CommandInfo> cat = [] {
    std::vector<CommandInfo> out;
    for (const auto& e : entries()) out.push_back(e.info);
    return out;
  }();
  return cat;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string suggest_command(const std::string& name) {
  std::string best;
  std::size_t best_d = 4;
  for (const auto& c : command_catalog()) {
    const std::size_t d = edit_distance(name, c.name);
    if (d < best_d) {
      best_d = d;
      best = c.name;
    }
  }
  return best;
}

RunOutcome run_command(const std::string& command, const Json& config, const RunContext& ctx) {
  RunOutcome o;
  const auto it = std::find_if(entries().begin(), entries().end(), [&](const Entry& e) { return e.info.name == command; });
  if (it == entries().end()) {
    o.exit_code = 2;
    o.message = "unknown command '" + command + "'";
    const std::string s = suggest_command(command);
    if (!s.empty()) o.message += "; did you mean '" + s + "'?";
    return o;
  }
  const auto t0 = std::chrono::steady_clock::now();
  Json results;
  std::string status = "ok";
  try {
    if (!config.is_object()) throw InputError("config must be a JSON object");
    if (config.contains("command") && config.at("command") != command) {
      throw InputError("config is for command '" + get_string(config, "command", "") + "', not '" + command + "'");
    }
    const std::uint64_t seed = get_seed(config);
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec || !fs::is_directory(ctx.out_dir)) throw InputError("unwritable output directory '" + ctx.out_dir + "'");
    Artifacts art(ctx.out_dir, command);
    Context c{config, ctx, seed, art};
    try {
      results = it->run(c);
    } catch (const PartialFailure& e) {
      results = e.results();
      o.exit_code = 3;
      o.message = e.what();
    } catch (const NumericalError& e) {
      o.exit_code = 3;
      o.message = e.what();
    } catch (const InputError&) {
      throw;
    } catch (const Json::exception&) {
      throw;
    } catch (const std::exception& e) {
      o.exit_code = 3;
      o.message = std::string("internal error: ") + e.what();
    }
    o.artifacts = art.paths();
  } catch (const InputError& e) {
    o.exit_code = 2;
    o.message = e.what();
    return o;
  } catch (const Json::exception& e) {
    o.exit_code = 2;
    o.message = std::string("config: ") + e.what();
    return o;
  }
  if (o.exit_code == 3) status = "numerical_failure";
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.report = Json{{"schema", kReportSchema},
                  {"command", command},
                  {"config", config},
                  {"config_hash", config_hash(config)},
                  {"seed", get_seed(config)},
                  {"status", status},
                  {"message", o.message},
                  {"results", results},
                  {"timing", {{"seconds", secs}, {"threads", ctx.threads}}}};
  const std::string path = (fs::path(ctx.out_dir) / (command + "_report.json")).string();
  std::ofstream out(path);
  if (!out) {
    o.exit_code = 2;
    o.message = "cannot write '" + path + "'";
    return o;
  }
  out << o.report.dump(2) << "\n";
  o.artifacts.push_back(path);
  return o;
}

}  // namespace pareg

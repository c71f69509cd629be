#include "pareg/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "pareg/expr.hpp"

namespace pareg {

namespace {

const Json& require(const Json& block, const std::string& key) {
  if (!block.is_object() || !block.contains(key)) throw InputError("config: missing key '" + key + "'");
  return block.at(key);
}

[[noreturn]] void bad_type(const std::string& key, const char* want) {
  throw InputError("config: key '" + key + "' must be " + want);
}

double as_number(const Json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  bad_type(key, "a number");
}

}  // namespace

Json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError("config: '" + path + "' is not valid JSON: " + e.what());
  }
}

std::string config_hash(const Json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double get_number(const Json& block, const std::string& key) { return as_number(require(block, key), key); }

double get_number(const Json& block, const std::string& key, double fallback) {
  if (!block.is_object() || !block.contains(key)) return fallback;
  return as_number(block.at(key), key);
}

int get_int(const Json& block, const std::string& key) {
  const Json& v = require(block, key);
  if (!v.is_number_integer()) bad_type(key, "an integer");
  return v.get<int>();
}

int get_int(const Json& block, const std::string& key, int fallback) {
  if (!block.is_object() || !block.contains(key)) return fallback;
  return get_int(block, key);
}

std::string get_string(const Json& block, const std::string& key, const std::string& fallback) {
  if (!block.is_object() || !block.contains(key)) return fallback;
  const Json& v = block.at(key);
  if (!v.is_string()) bad_type(key, "a string");
  return v.get<std::string>();
}

bool get_bool(const Json& block, const std::string& key, bool fallback) {
  if (!block.is_object() || !block.contains(key)) return fallback;
  const Json& v = block.at(key);
  if (!v.is_boolean()) bad_type(key, "true or false");
  return v.get<bool>();
}

std::vector<double> get_numbers(const Json& block, const std::string& key, std::vector<double> fallback) {
  if (!block.is_object() || !block.contains(key)) return fallback;
  const Json& v = block.at(key);
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) bad_type(key, "a number or an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(as_number(e, key));
  return out;
}

const Json& get_block(const Json& block, const std::string& key) {
  const Json& v = require(block, key);
  if (!v.is_object()) bad_type(key, "an object");
  return v;
}

std::uint64_t get_seed(const Json& config) {
  const Json& v = require(config, "seed");
  if (!v.is_number_integer() || v.get<long long>() < 0) bad_type("seed", "a nonnegative integer");
  return v.get<std::uint64_t>();
}

EllipticityPair parse_ellipticity(const Json& block) {
  EllipticityPair ell{get_number(block, "lambda", 1.0), get_number(block, "Lambda", 2.0)};
  ell.validate();
  return ell;
}

SymMat parse_symmat(const Json& rows) {
  if (!rows.is_array() || rows.empty()) throw InputError("config: matrix must be a nonempty array of rows");
  const int d = static_cast<int>(rows.size());
  if (d < 2 || d > kMaxDim) throw InputError("config: matrix dimension must be in 2..8");
  std::vector<double> dense;
  for (const auto& r : rows) {
    if (!r.is_array() || static_cast<int>(r.size()) != d) throw InputError("config: matrix must be square");
    for (const auto& e : r) dense.push_back(as_number(e, "matrix entry"));
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < i; ++j) {
      const double a = dense[static_cast<std::size_t>(i * d + j)];
      const double b = dense[static_cast<std::size_t>(j * d + i)];
      if (std::abs(a - b) > 1e-12 * (1.0 + std::abs(a))) throw InputError("config: matrix is not symmetric");
    }
  }
  const SymMat m = SymMat::from_dense(d, dense);
  if (!m.is_finite()) throw InputError("config: matrix has non-finite entries");
  return m;
}

const std::vector<std::string>& operator_names() {
  static const std::vector<std::string> names{"linear", "pucci_plus", "pucci_minus", "isaacs", "isaacs_smoothed"};
  return names;
}

SymMat random_elliptic_matrix(int dim, const EllipticityPair& ell, CounterRng& rng) {
  SpectralDecomposition s = eigen_decompose(random_symmat(dim, 1.0, rng));
  for (double& v : s.values) v = rng.uniform(ell.lambda, ell.Lambda);
  SymMat a = reconstruct(s);
  // Round-off can push an eigenvalue just past the bounds.
  const auto e = eigenvalues(a);
  if (e.front() < ell.lambda || e.back() > ell.Lambda) {
    const double mid = 0.5 * (ell.lambda + ell.Lambda);
    const double half = 0.5 * (ell.Lambda - ell.lambda);
    const double spread = std::max(std::abs(e.front() - mid), std::abs(e.back() - mid));
    SymMat centered = a - SymMat::identity(dim, mid);
    if (spread > half) centered *= half / spread * (1.0 - 1e-14);
    a = centered + SymMat::identity(dim, mid);
  }
  return a;
}

Operator parse_operator(const Json& block, int dim, std::uint64_t seed) {
  if (!block.is_object()) throw InputError("config: operator block must be an object");
  const std::string name = get_string(block, "name", "");
  const auto& names = operator_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    throw InputError("config: unresolved operator '" + name + "' (known: " + known + ")");
  }
  dim = get_int(block, "dim", dim);
  const EllipticityPair ell = parse_ellipticity(block);
  if (name == "pucci_plus") return pucci_operator(dim, ell, PucciSign::plus);
  if (name == "pucci_minus") return pucci_operator(dim, ell, PucciSign::minus);
  if (name == "linear") {
    const SymMat a = block.contains("A") ? parse_symmat(block.at("A")) : SymMat::identity(dim, ell.lambda);
    if (a.dim() != dim) throw InputError("config: operator matrix dimension does not match the grid");
    return linear_operator(a, ell);
  }
  IsaacsFamily fam;
  fam.n_inf = get_int(block, "n_inf", 2);
  fam.n_sup = get_int(block, "n_sup", 2);
  if (fam.n_inf < 1 || fam.n_sup < 1) throw InputError("config: n_inf and n_sup must be >= 1");
  const std::size_t count = static_cast<std::size_t>(fam.n_inf) * static_cast<std::size_t>(fam.n_sup);
  if (get_bool(block, "random", !block.contains("matrices"))) {
    CounterRng rng = CounterRng(seed).split(0x15aac5);
    for (std::size_t i = 0; i < count; ++i) fam.matrices.push_back(random_elliptic_matrix(dim, ell, rng));
  } else {
    const Json& ms = block.at("matrices");
    if (!ms.is_array() || ms.size() != count) {
      throw InputError("config: 'matrices' must list n_inf * n_sup = " + std::to_string(count) + " matrices");
    }
    for (const auto& m : ms) {
      fam.matrices.push_back(parse_symmat(m));
      if (fam.matrices.back().dim() != dim) throw InputError("config: operator matrix dimension does not match the grid");
    }
  }
  if (name == "isaacs") return isaacs_exact(std::move(fam), ell);
  return isaacs_smoothed(std::move(fam), ell, get_number(block, "tau", 0.05));
}

GridPtr parse_grid(const Json& block) {
  if (!block.is_object()) throw InputError("config: grid block must be an object");
  const int dim = get_int(block, "dim", 2);
  if (dim < 2 || dim > kMaxGridDim) throw InputError("config: grid dim must be 2 or 3");
  const int n = get_int(block, "n", 32);
  if (n < 2) throw InputError("config: grid n must be >= 2");
  const double L = get_number(block, "L", 1.0);
  const std::string shape = get_string(block, "domain", "ball");
  Domain dom;
  if (shape == "ball") {
    dom.shape = DomainShape::ball;
  } else if (shape == "cube") {
    dom.shape = DomainShape::cube;
  } else {
    throw InputError("config: grid domain must be 'ball' or 'cube'");
  }
  dom.radius = get_number(block, "radius", L);
  Point offset{};
  const auto off = get_numbers(block, "offset", {});
  if (!off.empty() && static_cast<int>(off.size()) != dim) throw InputError("config: grid offset needs dim entries");
  for (std::size_t i = 0; i < off.size(); ++i) offset[i] = off[i];
  return make_grid(dim, n, L, dom, offset);
}

bool is_quadratic(const Json& block) { return block.is_object() && block.contains("quadratic"); }

SymMat quadratic_matrix(const Json& block) {
  if (!is_quadratic(block)) throw InputError("config: function block is not quadratic");
  return parse_symmat(require(block.at("quadratic"), "Q"));
}

PointFunction parse_function(const Json& block) {
  if (!block.is_object()) throw InputError("config: function block must be an object");
  if (block.contains("expr")) {
    const Json& e = block.at("expr");
    if (!e.is_string()) bad_type("expr", "a string");
    Expression ex(e.get<std::string>());
    return [ex](const Point& x) { return ex(x); };
  }
  if (is_quadratic(block)) {
    const Json& q = block.at("quadratic");
    const SymMat Q = quadratic_matrix(block);
    std::vector<double> b = get_numbers(q, "b", std::vector<double>(static_cast<std::size_t>(Q.dim()), 0.0));
    if (static_cast<int>(b.size()) != Q.dim()) throw InputError("config: quadratic b needs dim entries");
    const double c = get_number(q, "c", 0.0);
    return [Q, b, c](const Point& x) {
      const std::span<const double> xs(x.data(), static_cast<std::size_t>(Q.dim()));
      double v = c + 0.5 * Q.quad_form(xs);
      for (std::size_t i = 0; i < b.size(); ++i) v += b[i] * x[i];
      return v;
    };
  }
  throw InputError("config: function block needs 'expr' or 'quadratic'");
}

GridFn parse_field(const Json& block, GridPtr grid) {
  if (block.is_object() && block.contains("csv")) {
    const Json& p = block.at("csv");
    if (!p.is_string()) bad_type("csv", "a path string");
    GridFn u = read_gridfn_csv(p.get<std::string>(), grid);
    for (std::size_t k : grid->domain_nodes()) {
      if (!std::isfinite(u.values[k])) throw InputError("config: csv field has no finite value at a domain node");
    }
    return u;
  }
  return sample(parse_function(block), std::move(grid));
}

Stencil parse_stencil(const std::string& name, int dim) {
  if (name == "standard") return Stencil::standard(dim);
  if (name == "axes") return Stencil::axes(dim);
  if (name == "axes_diagonals") return Stencil::axes_diagonals(dim);
  throw InputError("config: stencil must be 'standard', 'axes' or 'axes_diagonals'");
}

Scheme parse_scheme(const std::string& name) {
  if (name == "monotone_frames") return Scheme::monotone_frames;
  if (name == "fd_hessian") return Scheme::fd_hessian;
  throw InputError("config: scheme must be 'monotone_frames' or 'fd_hessian'");
}

SolveMethod parse_method(const std::string& name) {
  if (name == "newton") return SolveMethod::newton;
  if (name == "explicit") return SolveMethod::explicit_euler;
  throw InputError("config: method must be 'newton' or 'explicit'");
}

ContactMethod parse_contact_method(const std::string& name) {
  if (name == "exact") return ContactMethod::exact;
  if (name == "bisection") return ContactMethod::bisection;
  throw InputError("config: contact method must be 'exact' or 'bisection'");
}

Json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

Json json_numbers(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

}  // namespace pareg

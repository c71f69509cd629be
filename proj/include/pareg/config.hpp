#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pareg/contact.hpp"
#include "pareg/grid.hpp"
#include "pareg/operators.hpp"
#include "pareg/solver.hpp"

namespace pareg {

using Json = nlohmann::json;

inline constexpr const char* kReportSchema = "pareg.report/1";

/// Parses a JSON config file. Throws InputError on I/O or syntax errors.
Json load_config(const std::string& path);

/// FNV-1a 64 over the canonical (sorted-key, compact) dump, as 16 hex digits.
std::string config_hash(const Json& config);

/// Typed accessors that raise InputError naming the key.
double get_number(const Json& block, const std::string& key);
double get_number(const Json& block, const std::string& key, double fallback);
int get_int(const Json& block, const std::string& key);
int get_int(const Json& block, const std::string& key, int fallback);
std::string get_string(const Json& block, const std::string& key, const std::string& fallback);
bool get_bool(const Json& block, const std::string& key, bool fallback);
std::vector<double> get_numbers(const Json& block, const std::string& key, std::vector<double> fallback);
const Json& get_block(const Json& block, const std::string& key);
std::uint64_t get_seed(const Json& config);

/// {"lambda": l, "Lambda": L}, defaults (1, 2).
EllipticityPair parse_ellipticity(const Json& block);
/// Nested rows [[a, b], [b, c]]; must be symmetric within 1e-12.
SymMat parse_symmat(const Json& rows);

/// Operator catalog names.
const std::vector<std::string>& operator_names();

/// {"name": "linear" | "pucci_plus" | "pucci_minus" | "isaacs" |
///  "isaacs_smoothed", "lambda", "Lambda", ...}.
///   linear:  "A" (rows; default identity scaled by lambda).
///   isaacs*: "n_inf", "n_sup" and either "matrices" (sup index fastest) or
///            "random": true, drawing members with spectrum in [lambda,
///            Lambda] from `seed`. isaacs_smoothed also takes "tau".
Operator parse_operator(const Json& block, int dim, std::uint64_t seed);

/// Member with eigenvalues uniform in [lambda, Lambda] and a random frame.
SymMat random_elliptic_matrix(int dim, const EllipticityPair& ell, CounterRng& rng);

/// {"dim": 2, "n": 32, "L": 1, "domain": "ball" | "cube", "radius": 1,
///  "offset": [..]}.
GridPtr parse_grid(const Json& block);

/// {"expr": "..."} or {"quadratic": {"Q": rows, "b": [..], "c": c}}.
PointFunction parse_function(const Json& block);
/// parse_function sampled on grid, or {"csv": path} read onto it.
GridFn parse_field(const Json& block, GridPtr grid);
/// Q of a {"quadratic": ...} block; throws when the block is not quadratic.
bool is_quadratic(const Json& block);
SymMat quadratic_matrix(const Json& block);

Stencil parse_stencil(const std::string& name, int dim);
Scheme parse_scheme(const std::string& name);
SolveMethod parse_method(const std::string& name);
ContactMethod parse_contact_method(const std::string& name);

/// JSON number, or the strings "inf", "-inf", "nan" for non-finite values.
Json json_number(double v);
Json json_numbers(const std::vector<double>& v);

}  // namespace pareg

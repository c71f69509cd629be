#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "pareg/commands.hpp"
#include "pareg/config.hpp"
#include "pareg/expr.hpp"

using namespace pareg;
namespace fs = std::filesystem;

namespace {

RunContext scratch(const std::string& name) {
  RunContext ctx;
  ctx.out_dir = (fs::temp_directory_path() / ("pareg_cli_test_" + name)).string();
  return ctx;
}

}  // namespace

TEST_CASE("expressions evaluate with precedence and functions") {
  const Point x{0.5, -2.0, 0.0};
  CHECK(Expression("1 + 2 * 3")(x) == 7.0);
  CHECK(Expression("2 ^ 3 ^ 2")(x) == 512.0);
  CHECK(Expression("-2 ^ 2")(x) == -4.0);
  CHECK(Expression("x1 * x2 + y")(x) == doctest::Approx(-3.0));
  CHECK(Expression("r")(x) == doctest::Approx(std::hypot(0.5, 2.0)));
  CHECK(Expression("atan2(x2, x1) + max(1, 3) - min(4, 5)")(x) == doctest::Approx(std::atan2(-2.0, 0.5) - 1.0));
  CHECK(Expression("sin(pi / 2) * exp(0) + sqrt(abs(x2))")(x) == doctest::Approx(1.0 + std::sqrt(2.0)));
}

TEST_CASE("expression syntax errors are input errors") {
  CHECK_THROWS_AS(Expression("1 +"), InputError);
  CHECK_THROWS_AS(Expression("foo(1)"), InputError);
  CHECK_THROWS_AS(Expression("sin(1, 2)"), InputError);
  CHECK_THROWS_AS(Expression("(x1"), InputError);
  CHECK_THROWS_AS(Expression("x4"), InputError);
}

TEST_CASE("config parsing") {
  const Json grid = {{"dim", 2}, {"n", 8}, {"L", 1.0}, {"domain", "cube"}};
  const GridPtr g = parse_grid(grid);
  CHECK(g->h() == doctest::Approx(0.125));
  CHECK_THROWS_AS(parse_grid(Json{{"dim", 4}, {"n", 8}}), InputError);
  CHECK_THROWS_AS(parse_symmat(Json::parse("[[1, 2], [3, 4]]")), InputError);
  CHECK_THROWS_AS(parse_operator(Json{{"name", "nope"}}, 2, 1), InputError);
  const Operator op = parse_operator(Json{{"name", "isaacs_smoothed"}, {"Lambda", 3.0}}, 2, 7);
  CHECK(op.ellipticity().Lambda == 3.0);
  const Json quad = {{"quadratic", {{"Q", {{2.0, 0.0}, {0.0, -1.0}}}, {"b", {1.0, 0.0}}, {"c", 0.5}}}};
  CHECK(is_quadratic(quad));
  CHECK(parse_function(quad)(Point{1.0, 2.0, 0.0}) == doctest::Approx(0.5 + 1.0 + 0.5 * (2.0 - 4.0)));
  CHECK_THROWS_AS(get_seed(Json::object()), InputError);
  const Json a = Json::parse(R"({"b": 1, "a": [1, 2]})");
  const Json b = Json::parse(R"({"a": [1, 2], "b": 1})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  CHECK(json_number(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("command catalog and suggestions") {
  CHECK(command_catalog().size() == 11);
  CHECK(suggest_command("thetta") == "theta");
  CHECK(suggest_command("counterexampel") == "counterexample");
  CHECK(suggest_command("zzzzzzzzzz").empty());
  CHECK(edit_distance("kitten", "sitting") == 3);
}

TEST_CASE("theta command on a quadratic reports the closed form") {
  const Json cfg = {{"seed", 1},
                    {"grid", {{"dim", 2}, {"n", 12}, {"L", 1.0}, {"domain", "ball"}}},
                    {"function", {{"quadratic", {{"Q", {{1.0, 0.5}, {0.5, -2.0}}}}}}}};
  const RunOutcome o = run_command("theta", cfg, scratch("theta"));
  REQUIRE(o.exit_code == 0);
  CHECK(o.report["schema"] == kReportSchema);
  CHECK(o.report["status"] == "ok");
  // Lattice directions only approximate the eigenvectors at this resolution.
  CHECK(o.report["results"]["max_error"]["theta"].get<double>() <= 5e-2);
  CHECK(o.artifacts.back().ends_with("theta_report.json"));
  for (const auto& path : o.artifacts) CHECK(fs::exists(path));
}

TEST_CASE("validation failures exit with code 2") {
  const Json bad_eps = {{"seed", 1},
                        {"params", {{"alpha", 1.0}, {"R", {0.2, 0.1}}, {"lambda", 1.0}, {"Lambda", 2.0}, {"epsilon", 0.5}}}};
  CHECK(run_command("counterexample", bad_eps, scratch("bad")).exit_code == 2);
  CHECK(run_command("theta", Json{{"grid", {{"n", 8}}}}, scratch("noseed")).exit_code == 2);
  CHECK(run_command("nosuch", Json{{"seed", 1}}, scratch("unknown")).exit_code == 2);
}

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pareg/commands.hpp"

namespace {

void print_catalog(bool json) {
  const auto& cat = pareg::command_catalog();
  if (json) {
    pareg::Json out = pareg::Json::array();
    for (const auto& c : cat) out.push_back({{"name", c.name}, {"summary", c.summary}});
    std::cout << pareg::Json{{"schema", pareg::kReportSchema}, {"commands", out}}.dump(2) << "\n";
    return;
  }
  std::cout << "commands:\n";
  for (const auto& c : cat) std::cout << "  " << c.name << std::string(16 - c.name.size(), ' ') << c.summary << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for fully nonlinear elliptic regularity experiments"};
  std::string command;
  std::string config_path;
  std::string out_dir;
  bool json = false;
  int threads = 1;
  app.add_option("command", command, "subcommand to run, or 'list'");
  app.add_option("--config,-c", config_path, "JSON config file");
  app.add_option("--out,-o", out_dir, "output directory (overrides PAREG_OUT_DIR and the config)");
  app.add_flag("--json", json, "machine-readable output");
  app.add_option("--threads,-j", threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (command.empty() || command == "list") {
    print_catalog(json);
    return 0;
  }
  bool known = false;
  for (const auto& c : pareg::command_catalog()) known = known || c.name == command;
  if (!known) {
    std::cerr << "error: unknown command '" << command << "'";
    const std::string s = pareg::suggest_command(command);
    if (!s.empty()) std::cerr << "; did you mean '" << s << "'?";
    std::cerr << "\n";
    return 2;
  }
  if (config_path.empty()) {
    std::cerr << "error: " << command << " needs --config <path>\n";
    return 2;
  }

  pareg::Json config;
  try {
    config = pareg::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  pareg::RunContext ctx;
  ctx.threads = threads;
  if (!out_dir.empty()) {
    ctx.out_dir = out_dir;
  } else if (const char* env = std::getenv("PAREG_OUT_DIR"); env && *env) {
    ctx.out_dir = env;
  } else if (config.is_object() && config.contains("output_dir") && config.at("output_dir").is_string()) {
    ctx.out_dir = config.at("output_dir").get<std::string>();
  } else {
    ctx.out_dir = "pareg_out";
  }

  const pareg::RunOutcome o = pareg::run_command(command, config, ctx);
  if (json && !o.report.is_null()) {
    std::cout << o.report.dump(2) << "\n";
  } else if (!o.report.is_null()) {
    std::cout << command << ": " << o.report.at("status").get<std::string>() << "\n";
    for (const auto& a : o.artifacts) std::cout << "  wrote " << a << "\n";
  }
  if (o.exit_code != 0) std::cerr << "error: " << o.message << "\n";
  return o.exit_code;
}

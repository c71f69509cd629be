#pragma once

#include <string>
#include <vector>

#include "pareg/config.hpp"

namespace pareg {

struct CommandInfo {
  std::string name;
  std::string summary;
};

/// The subcommands in catalog order.
const std::vector<CommandInfo>& command_catalog();

/// Closest catalog name by edit distance, empty when nothing is within 3.
std::string suggest_command(const std::string& name);

std::size_t edit_distance(const std::string& a, const std::string& b);

struct RunContext {
  std::string out_dir;  // created when missing
  int threads = 1;      // affects timing only
};

struct RunOutcome {
  int exit_code = 0;  // 0 ok, 2 validation error, 3 numerical failure
  std::string message;
  Json report;                         // written as <out>/<command>_report.json
  std::vector<std::string> artifacts;  // paths, report last
};

/// Validates the config, dispatches to the command and writes the JSON
/// report plus CSV artifacts. Errors are mapped to exit codes, never thrown.
RunOutcome run_command(const std::string& command, const Json& config, const RunContext& ctx);

}  // namespace pareg

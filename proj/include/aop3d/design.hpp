#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "aop3d/optimizer.hpp"

namespace aop3d::design {

// {"dims":{"name":["choice",...],...}, "command":"... {config} ...",
//  "budget":N, "seed":S}. Dimension order follows the file.
struct DesignSpaceSpec {
  std::vector<std::pair<std::string, std::vector<std::string>>> dims;
  std::string command;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
};

DesignSpaceSpec spec_from_json(const nlohmann::ordered_json& j);
DesignSpaceSpec read_spec(const std::filesystem::path& path);
void validate(const DesignSpaceSpec& spec);
bo::SearchSpace design_space(const DesignSpaceSpec& spec);

struct CommandResult {
  int exit_code = 0;
  std::string out, err;
};

// Runs a shell command, capturing stdout and stderr.
CommandResult run_command(const std::string& command);

// Parses the last non-empty stdout line as {"objective": number}.
double parse_objective(const std::string& stdout_text);

// Each trial writes the config as JSON to a temporary file, substitutes its
// path for {config}, runs the command, and reads the objective. Nonzero exit
// or malformed output marks the trial failed with the captured stderr.
bo::Trace optimize_design(const DesignSpaceSpec& spec, std::function<void(const bo::Trial&)> on_trial = {});

}  // namespace aop3d::design

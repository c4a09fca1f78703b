#pragma once

// Subcommands of the command-line tool. Each writes its artifacts into the output
// directory and returns a JSON summary; `pass` is false when a check misses its tolerance.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenario.hpp"

namespace dshell::app
{

struct RunOptions
{
  std::optional<std::filesystem::path> out; ///< overrides the config's output directory
  std::optional<double> tol;                ///< overrides the residual tolerance
  std::optional<IVariant> variant;
};

struct RunResult
{
  nlohmann::json summary;
  bool pass = true;
};

const std::vector<std::string>& command_names();

/// Throws ConfigError when the scenario lacks what the command needs.
RunResult run_command(const std::string& command, const ScenarioConfig& cfg, const RunOptions& opt);

/// Residual tolerance in effect: the override, else the config value, else order_c * max(h1, h2)^2.
double effective_tolerance(const ScenarioConfig& cfg, const RunOptions& opt);

} // namespace dshell::app

// dshell: geometry, compatibility and plate-solver commands driven by a scenario file.
//
// Exit codes: 0 all checks passed, 1 a check failed, 2 configuration or usage error,
// 3 numerical failure, 4 I/O failure.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"

namespace
{

using dshell::app::ConfigError;
using nlohmann::json;

enum Exit
{
  ok = 0,
  checks_failed = 1,
  config_error = 2,
  numerical_error = 3,
  io_error = 4
};

int report(const std::optional<std::filesystem::path>& out, const std::string& type, const std::string& where,
           const std::string& message, int code)
{
  const json j{{"error", {{"type", type}, {"where", where}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
  if (out && std::filesystem::is_directory(*out))
  {
    std::ofstream f(*out / "error.json");
    f << j.dump(2) << "\n";
  }
  return code;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Directed-shell geometry, compatibility and plate solver"};
  app.require_subcommand(1);
  std::string config;
  std::optional<std::string> out;
  std::optional<double> tol;
  std::optional<std::string> variant;
  bool quiet = false;
  for (const auto& name : dshell::app::command_names())
  {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config,-c", config, "scenario JSON file")->required();
    sub->add_option("--out,-o", out, "output directory (default: the config's output entry)");
    sub->add_option("--tol", tol, "residual tolerance override");
    sub->add_option("--variant", variant, "triple-curvature variant")->check(CLI::IsMember({"rel3", "remark"}));
    sub->add_flag("--quiet,-q", quiet, "suppress the summary on stdout");
  }

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::CallForHelp& e)
  {
    return app.exit(e);
  }
  catch (const CLI::ParseError& e)
  {
    app.exit(e);
    return config_error;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  std::optional<std::filesystem::path> out_dir;
  if (out) out_dir = *out;
  try
  {
    const dshell::app::ScenarioConfig cfg = dshell::app::load_scenario(config);
    dshell::app::RunOptions opt;
    if (out) opt.out = *out;
    opt.tol = tol;
    if (variant) opt.variant = dshell::parse_variant(*variant);
    out_dir = opt.out.value_or(cfg.output);
    const dshell::app::RunResult r = dshell::app::run_command(command, cfg, opt);
    if (!quiet) std::cout << r.summary.dump(2) << "\n";
    return r.pass ? ok : checks_failed;
  }
  catch (const ConfigError& e)
  {
    return report(out_dir, "config", e.where(), e.what(), config_error);
  }
  catch (const dshell::NumericalError& e)
  {
    return report(out_dir, "numerical", "", e.what(), numerical_error);
  }
  catch (const std::filesystem::filesystem_error& e)
  {
    return report(out_dir, "io", e.path1().string(), e.what(), io_error);
  }
  catch (const dshell::Error& e)
  {
    const std::string msg = e.what();
    const bool io = msg.rfind("cannot ", 0) == 0;
    return report(out_dir, io ? "io" : "config", "", msg, io ? io_error : config_error);
  }
  catch (const std::exception& e)
  {
    return report(out_dir, "numerical", "", e.what(), numerical_error);
  }
}

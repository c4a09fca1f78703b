#pragma once

// Scenario configuration: a JSON document of expression strings, material data and solver
// settings. Loading validates everything up front so commands only see consistent input.

#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "dshell/compat.hpp"
#include "dshell/expr.hpp"
#include "dshell/klsolver.hpp"

namespace dshell::app
{

/// Invalid configuration; `where` is a JSON pointer to the offending entry.
class ConfigError : public Error
{
public:
  ConfigError(std::string where, const std::string& what) : Error(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

private:
  std::string where_;
};

struct StrainExprs
{
  std::array<Expr, 3> E;   ///< E_11, E_12, E_22
  std::array<Expr, 4> Lam; ///< Lambda_11, Lambda_12, Lambda_21, Lambda_22
  std::array<Expr, 2> lam; ///< Lambda_a
  std::array<Expr, 2> Del; ///< Delta_a
  Expr del;                ///< Delta
};

struct PlateConfig
{
  enum class Source
  {
    incompatibility, ///< K and L_s given directly
    torsion,         ///< T^p_12 given; T^p_21 = -T^p_12
    manufactured     ///< E* and Lambda* given; sources and boundary data derived
  };

  PlateMode mode = PlateMode::pure_bending;
  PlateBoundary boundary = PlateBoundary::dirichlet;
  Source source = Source::incompatibility;
  Expr K;
  std::array<Expr, 2> L;
  std::array<Expr, 3> T;
  std::array<Expr, 3> E_star;   ///< E*_11, E*_12, E*_22
  std::array<Expr, 3> Lam_star; ///< Lambda*_11, Lambda*_12, Lambda*_22
};

struct SolverSettings
{
  std::optional<double> tol;  ///< residual tolerance; default order_c * max(h1, h2)^2
  double order_c = 20.0;
  double plate_tol = 1e-4;    ///< manufactured recovery tolerance
  int max_iterations = 30;
  double gradient_tol = 1e-8;
  IVariant variant = IVariant::remark;
};

struct ScenarioConfig
{
  std::string name;
  std::filesystem::path base_dir; ///< relative paths resolve against the config file's directory
  ParamGrid grid{{0, 1}, {0, 1}, 5, 5};
  std::array<Expr, 3> chart;

  std::optional<std::array<Expr, 3>> r; ///< deformed midsurface
  std::optional<std::array<Expr, 3>> d; ///< director
  std::optional<StrainExprs> strains;
  std::optional<std::filesystem::path> strains_file;
  std::optional<std::array<Expr, 9>> H;
  std::optional<std::array<Expr, 9>> dH;

  Material material;
  double half_thickness = 0.05;
  SolverSettings solver;
  std::optional<PlateConfig> plate;
  std::filesystem::path output{"out"};

  bool has_deformation() const { return r.has_value(); }
  bool has_strains() const { return strains.has_value() || strains_file.has_value(); }
  bool has_uniformity() const { return H.has_value(); }
};

ScenarioConfig parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

} // namespace dshell::app

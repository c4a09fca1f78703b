#include "scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace dshell::app
{

namespace
{

using nlohmann::json;

// Walks one JSON object and rejects keys that were never read.
class Object
{
public:
  Object(const json& j, std::string where) : j_(j), where_(std::move(where))
  {
    if (!j_.is_object()) throw ConfigError(where_, "expected an object");
  }

  /// Marks the key as read, so optional entries never trip finish().
  bool has(const std::string& key)
  {
    seen_.insert(key);
    return j_.contains(key);
  }
  std::string path(const std::string& key) const { return where_ + "/" + key; }

  const json& at(const std::string& key)
  {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(path(key), "required entry missing");
    return j_.at(key);
  }

  Object object(const std::string& key) { return {at(key), path(key)}; }

  double number(const std::string& key)
  {
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(path(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(path(key), "expected a finite number");
    return x;
  }

  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  double positive(const std::string& key, double fallback)
  {
    const double x = number(key, fallback);
    if (!(x > 0.0)) throw ConfigError(path(key), "must be positive");
    return x;
  }

  int integer(const std::string& key)
  {
    const json& v = at(key);
    if (!v.is_number_integer()) throw ConfigError(path(key), "expected an integer");
    return v.get<int>();
  }

  std::string string(const std::string& key)
  {
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError(path(key), "expected a string");
    return v.get<std::string>();
  }

  Expr expr(const std::string& key) { return parse_expr(at(key), path(key)); }

  template <std::size_t N>
  std::array<Expr, N> exprs(const std::string& key)
  {
    const json& v = at(key);
    if (!v.is_array() || v.size() != N)
      throw ConfigError(path(key), "expected an array of " + std::to_string(N) + " expressions");
    std::array<Expr, N> out;
    for (std::size_t k = 0; k < N; ++k) out[k] = parse_expr(v[k], path(key) + "/" + std::to_string(k));
    return out;
  }

  template <std::size_t N>
  std::array<Expr, N> exprs_or_zero(const std::string& key)
  {
    if (!has(key)) return {};
    return exprs<N>(key);
  }

  void finish() const
  {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(path(key), "unknown entry");
  }

  static Expr parse_expr(const json& v, const std::string& where)
  {
    if (v.is_number()) return Expr::constant(v.get<double>());
    if (!v.is_string()) throw ConfigError(where, "expected an expression string or a number");
    try
    {
      return Expr::parse(v.get<std::string>());
    }
    catch (const Error& e)
    {
      throw ConfigError(where, e.what());
    }
  }

private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Interval interval(Object& o, const std::string& key)
{
  const json& v = o.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(o.path(key), "expected [lo, hi]");
  return {v[0].get<double>(), v[1].get<double>()};
}

ParamGrid parse_grid(Object g)
{
  const Interval t1 = interval(g, "t1");
  const Interval t2 = interval(g, "t2");
  int n1 = 0, n2 = 0;
  if (g.has("n"))
  {
    if (g.has("n1") || g.has("n2")) throw ConfigError(g.path("n"), "give either n or n1 and n2");
    n1 = n2 = g.integer("n");
  }
  else
  {
    n1 = g.integer("n1");
    n2 = g.integer("n2");
  }
  g.finish();
  try
  {
    return ParamGrid(t1, t2, n1, n2);
  }
  catch (const Error& e)
  {
    throw ConfigError("/grid", e.what());
  }
}

template <std::size_t N>
void require_finite_on_grid(const std::array<Expr, N>& e, const ParamGrid& g, const std::string& where, double zeta = 0.0)
{
  for (std::size_t k = 0; k < N; ++k)
  {
    try
    {
      (void)e[k].sample(g, zeta);
    }
    catch (const Error& err)
    {
      throw ConfigError(where + "/" + std::to_string(k), err.what());
    }
  }
}

PlateConfig parse_plate(Object p)
{
  PlateConfig c;
  try
  {
    c.mode = parse_plate_mode(p.string("mode"));
  }
  catch (const ConfigError&)
  {
    throw;
  }
  catch (const Error& e)
  {
    throw ConfigError(p.path("mode"), e.what());
  }
  if (p.has("boundary"))
  {
    const std::string b = p.string("boundary");
    if (b == "dirichlet")
      c.boundary = PlateBoundary::dirichlet;
    else if (b == "traction_free")
      c.boundary = PlateBoundary::traction_free;
    else
      throw ConfigError(p.path("boundary"), "expected dirichlet or traction_free, got '" + b + "'");
  }
  const int given = p.has("source") + p.has("torsion") + p.has("manufactured");
  if (given != 1) throw ConfigError(p.path("source"), "give exactly one of source, torsion, manufactured");
  if (p.has("source"))
  {
    Object s = p.object("source");
    c.source = PlateConfig::Source::incompatibility;
    c.K = s.has("K") ? s.expr("K") : Expr();
    c.L = s.exprs_or_zero<2>("L");
    s.finish();
  }
  else if (p.has("torsion"))
  {
    Object s = p.object("torsion");
    c.source = PlateConfig::Source::torsion;
    c.T = s.exprs<3>("T");
    s.finish();
  }
  else
  {
    Object s = p.object("manufactured");
    c.source = PlateConfig::Source::manufactured;
    c.E_star = s.exprs_or_zero<3>("E");
    c.Lam_star = s.exprs<3>("Lambda");
    s.finish();
  }
  if (c.source == PlateConfig::Source::manufactured && c.boundary != PlateBoundary::dirichlet)
    throw ConfigError(p.path("boundary"), "manufactured plate solves need dirichlet boundary data");
  p.finish();
  return c;
}

} // namespace

ScenarioConfig parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir)
{
  ScenarioConfig c;
  c.base_dir = base_dir;
  Object root(doc, "");
  c.name = root.string("name");
  c.grid = parse_grid(root.object("grid"));
  c.chart = root.exprs<3>("chart");
  require_finite_on_grid(c.chart, c.grid, "/chart");

  const int kinds = root.has("deformation") + root.has("strains") + root.has("uniformity");
  if (kinds > 1) throw ConfigError("", "give at most one of deformation, strains, uniformity");
  if (root.has("deformation"))
  {
    Object d = root.object("deformation");
    c.r = d.exprs<3>("r");
    c.d = d.exprs<3>("d");
    d.finish();
    require_finite_on_grid(*c.r, c.grid, "/deformation/r");
    require_finite_on_grid(*c.d, c.grid, "/deformation/d");
  }
  if (root.has("strains"))
  {
    Object s = root.object("strains");
    if (s.has("file"))
    {
      std::filesystem::path f = s.string("file");
      if (f.is_relative()) f = base_dir / f;
      if (!std::filesystem::is_regular_file(f)) throw ConfigError("/strains/file", "file not found: " + f.string());
      c.strains_file = f;
    }
    else
    {
      StrainExprs e;
      e.E = s.exprs_or_zero<3>("E");
      e.Lam = s.exprs_or_zero<4>("Lambda");
      e.lam = s.exprs_or_zero<2>("Lambda_a");
      e.Del = s.exprs_or_zero<2>("Delta_a");
      e.del = s.has("Delta") ? s.expr("Delta") : Expr();
      require_finite_on_grid(e.E, c.grid, "/strains/E");
      require_finite_on_grid(e.Lam, c.grid, "/strains/Lambda");
      require_finite_on_grid(e.lam, c.grid, "/strains/Lambda_a");
      require_finite_on_grid(e.Del, c.grid, "/strains/Delta_a");
      require_finite_on_grid(std::array<Expr, 1>{e.del}, c.grid, "/strains/Delta");
      c.strains = std::move(e);
    }
    s.finish();
  }

  c.half_thickness = root.positive("half_thickness", c.half_thickness);
  if (root.has("uniformity"))
  {
    Object u = root.object("uniformity");
    c.H = u.exprs<9>("H");
    if (u.has("dH"))
      c.dH = u.exprs<9>("dH");
    u.finish();
    for (double z : {-c.half_thickness, 0.0, c.half_thickness}) require_finite_on_grid(*c.H, c.grid, "/uniformity/H", z);
  }

  if (root.has("material"))
  {
    Object m = root.object("material");
    c.material.E_young = m.number("E_young", c.material.E_young);
    c.material.nu = m.number("nu", c.material.nu);
    c.material.h = m.number("h", c.material.h);
    m.finish();
    try
    {
      c.material.validate();
    }
    catch (const Error& e)
    {
      throw ConfigError("/material", e.what());
    }
  }

  if (root.has("solver"))
  {
    Object s = root.object("solver");
    if (s.has("tol"))
      c.solver.tol = s.positive("tol", 1.0);
    c.solver.order_c = s.positive("order_c", c.solver.order_c);
    c.solver.plate_tol = s.positive("plate_tol", c.solver.plate_tol);
    c.solver.gradient_tol = s.positive("gradient_tol", c.solver.gradient_tol);
    if (s.has("max_iterations"))
    {
      c.solver.max_iterations = s.integer("max_iterations");
      if (c.solver.max_iterations < 1) throw ConfigError("/solver/max_iterations", "must be at least 1");
    }
    if (s.has("variant"))
    {
      try
      {
        c.solver.variant = parse_variant(s.string("variant"));
      }
      catch (const ConfigError&)
      {
        throw;
      }
      catch (const Error& e)
      {
        throw ConfigError("/solver/variant", e.what());
      }
    }
    s.finish();
  }

  if (root.has("plate"))
  {
    c.plate = parse_plate(root.object("plate"));
    const PlateConfig& p = *c.plate;
    require_finite_on_grid(std::array<Expr, 1>{p.K}, c.grid, "/plate/source/K");
    require_finite_on_grid(p.L, c.grid, "/plate/source/L");
    require_finite_on_grid(p.T, c.grid, "/plate/torsion/T");
    require_finite_on_grid(p.E_star, c.grid, "/plate/manufactured/E");
    require_finite_on_grid(p.Lam_star, c.grid, "/plate/manufactured/Lambda");
  }

  if (root.has("output"))
    c.output = root.string("output");
  root.finish();
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  nlohmann::json doc;
  try
  {
    doc = nlohmann::json::parse(in);
  }
  catch (const nlohmann::json::parse_error& e)
  {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_scenario(doc, path.parent_path());
}

} // namespace dshell::app

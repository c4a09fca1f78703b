#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dshell/defects.hpp"
#include "dshell/geometry.hpp"
#include "dshell/io.hpp"

namespace dshell::app
{

namespace
{

using nlohmann::json;

double tensor_max(const Tensor3<3>& t)
{
  double m = 0.0;
  for (double v : t.c) m = std::max(m, std::abs(v));
  return m;
}

double tensor_max(const Tensor4<3>& t)
{
  double m = 0.0;
  for (double v : t.c) m = std::max(m, std::abs(v));
  return m;
}

template <class T>
double gap(const Field<T>& a, const Field<T>& b)
{
  return zip([](const T& x, const T& y) -> T { return x - y; }, a, b).max_norm();
}

double strain_gap(const StrainSet& a, const StrainSet& b)
{
  return std::max({gap(a.E, b.E), gap(a.Lam, b.Lam), gap(a.lam, b.lam), gap(a.Del, b.Del), gap(a.del, b.del)});
}

double curvature_gap(const Curvature3& a, const Curvature3& b)
{
  double e = 0.0;
  for (int k = 0; k < 6; ++k) e = std::max(e, gap(a.K[k], b.K[k]));
  return e;
}

bool monotone(const std::vector<IterationRecord>& log)
{
  for (std::size_t q = 1; q < log.size(); ++q)
    if (!(log[q].residual < log[q - 1].residual)) return false;
  return true;
}

// Files go into the output directory in the order they are written; the manifest lists them.
class Output
{
public:
  explicit Output(std::filesystem::path dir) : dir_(std::move(dir))
  {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  void table(const std::string& file, const CsvTable& t)
  {
    std::ostringstream os;
    t.write(os);
    text(file, os.str());
    entries_.push_back(t.manifest(file));
  }

  void log(const std::string& file, const std::vector<IterationRecord>& log)
  {
    std::ostringstream os;
    write_iteration_log(os, log);
    text(file, os.str());
    entries_.push_back({{"file", file}, {"columns", {"iteration", "residual", "step", "damping"}}});
  }

  void document(const std::string& file, const json& j)
  {
    text(file, j.dump(2) + "\n");
    entries_.push_back({{"file", file}});
  }

  void finish(const std::string& command, const std::string& scenario)
  {
    const json m{{"command", command}, {"scenario", scenario}, {"files", entries_}};
    text("manifest.json", m.dump(2) + "\n");
  }

private:
  void text(const std::string& file, const std::string& content)
  {
    const auto path = dir_ / file;
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw Error("cannot write " + path.string());
  }

  std::filesystem::path dir_;
  std::vector<json> entries_;
};

struct Context
{
  const ScenarioConfig& cfg;
  SurfaceGeometry geo;
  double tol;
  IVariant variant;
  Output out;
};

Context make_context(const ScenarioConfig& cfg, const RunOptions& opt)
{
  const SurfaceChart chart = SurfaceChart::from_exprs(cfg.chart[0], cfg.chart[1], cfg.chart[2], cfg.grid);
  return {cfg, fundamental_forms(chart), effective_tolerance(cfg, opt), opt.variant.value_or(cfg.solver.variant),
          Output(opt.out.value_or(cfg.output))};
}

VecField sample3(const std::array<Expr, 3>& e, const ParamGrid& g)
{
  return VecField::generate(g, [&](int i, int j) {
    const double t1 = g.theta1(i), t2 = g.theta2(j);
    return Vec3(e[0].eval(t1, t2), e[1].eval(t1, t2), e[2].eval(t1, t2));
  });
}

DirectedDeformation sampled_deformation(const ScenarioConfig& cfg)
{
  return {sample3(*cfg.r, cfg.grid), sample3(*cfg.d, cfg.grid)};
}

UniformityField sampled_uniformity(const ScenarioConfig& cfg)
{
  return uniformity_from_exprs(cfg.grid, *cfg.H, cfg.dH ? &*cfg.dH : nullptr);
}

StrainSet read_strain_file(const std::filesystem::path& file, const ParamGrid& g)
{
  std::ifstream in(file);
  if (!in) throw Error("cannot open " + file.string());
  const CsvData csv = read_csv(in);
  StrainSet s = StrainSet::zero(g);
  s.E = field_from_csv<Mat2>(csv, g, "E");
  s.Lam = field_from_csv<Mat2>(csv, g, "Lambda");
  s.lam = field_from_csv<Vec2>(csv, g, "Lambda_a");
  s.Del = field_from_csv<Vec2>(csv, g, "Delta_a");
  s.del = field_from_csv<double>(csv, g, "Delta");
  return s;
}

StrainSet scenario_strains(const Context& c)
{
  const ScenarioConfig& cfg = c.cfg;
  const ParamGrid& g = cfg.grid;
  if (cfg.has_deformation()) return strain_measures(c.geo, sampled_deformation(cfg));
  if (cfg.strains_file) return read_strain_file(*cfg.strains_file, g);
  if (cfg.strains)
  {
    const StrainExprs& e = *cfg.strains;
    auto at = [&](const Expr& x, int i, int j) { return x.eval(g.theta1(i), g.theta2(j)); };
    StrainSet s = StrainSet::zero(g);
    s.E = Mat2Field::generate(g, [&](int i, int j) {
      return (Mat2() << at(e.E[0], i, j), at(e.E[1], i, j), at(e.E[1], i, j), at(e.E[2], i, j)).finished();
    });
    s.Lam = Mat2Field::generate(g, [&](int i, int j) {
      return (Mat2() << at(e.Lam[0], i, j), at(e.Lam[1], i, j), at(e.Lam[2], i, j), at(e.Lam[3], i, j)).finished();
    });
    s.lam = Vec2Field::generate(g, [&](int i, int j) { return Vec2(at(e.lam[0], i, j), at(e.lam[1], i, j)); });
    s.Del = Vec2Field::generate(g, [&](int i, int j) { return Vec2(at(e.Del[0], i, j), at(e.Del[1], i, j)); });
    s.del = e.del.sample(g);
    return s;
  }
  if (cfg.has_uniformity()) return strains_from_bases(cosserat_bases(sampled_uniformity(cfg), c.geo), c.geo);
  throw ConfigError("", "this command needs a deformation, strains or uniformity entry");
}

CsvTable strain_table(const StrainSet& s)
{
  CsvTable t(s.grid());
  t.add(s.E, "E").add(s.Lam, "Lambda").add(s.lam, "Lambda_a").add(s.Del, "Delta_a").add(s.del, "Delta");
  return t;
}

// The pulled-back metric is parallel for L = H^-1 dH, and the contortion split valid, only
// over a Cartesian reference chart.
bool cartesian_reference(const SurfaceGeometry& geo)
{
  return gap(geo.A, Mat2Field::constant(geo.grid(), Mat2::Identity())) < 1e-12 && geo.B.max_norm() < 1e-12;
}

json check(const std::string& name, double value, double tol)
{
  return {{"name", name}, {"value", value}, {"tol", tol}, {"pass", value <= tol}};
}

json base_summary(const Context& c, const std::string& command)
{
  return {{"command", command}, {"scenario", c.cfg.name}, {"grid", grid_json(c.cfg.grid)}};
}

RunResult finish(Context& c, const std::string& command, json summary, bool pass, const std::string& file = "summary.json")
{
  summary["pass"] = pass;
  c.out.document(file, summary);
  c.out.finish(command, c.cfg.name);
  return {std::move(summary), pass};
}

RunResult run_geom(Context& c)
{
  const SurfaceGeometry& geo = c.geo;
  const ScalarField gauss = zip([](const Mat2& A, const Mat2& B) { return B.determinant() / A.determinant(); }, geo.A, geo.B);
  const ScalarField mean = zip([](const Mat2& Ai, const Mat2& B) { return 0.5 * (Ai * B).trace(); }, geo.Ainv, geo.B);
  CsvTable t(geo.grid());
  t.add(geo.R, "R").add(geo.N, "N").add(geo.A, "A").add(geo.B, "B").add(geo.C, "C").add(gauss, "K").add(mean, "H");
  c.out.table("geometry.csv", t);
  json s = base_summary(c, "geom");
  s["max"] = {{"gauss_curvature", gauss.max_norm()}, {"mean_curvature", mean.max_norm()}};
  return finish(c, "geom", std::move(s), true);
}

RunResult run_strains(Context& c)
{
  const StrainSet s = scenario_strains(c);
  c.out.table("strains.csv", strain_table(s));
  json sum = base_summary(c, "strains");
  sum["max"] = {{"E", s.E.max_norm()},        {"Lambda", s.Lam.max_norm()}, {"Lambda_a", s.lam.max_norm()},
                {"Delta_a", s.Del.max_norm()}, {"Delta", s.del.max_norm()}};
  return finish(c, "strains", std::move(sum), true);
}

RunResult run_compat(Context& c)
{
  const StrainSet s = scenario_strains(c);
  const IncompatibilitySet r = compatibility_residuals(c.geo, s);
  CsvTable t(s.grid());
  t.add(r.J, "J").add(r.K, "K").add(r.L, "L").add(r.I, "I");
  c.out.table("residuals.csv", t);
  json sum = base_summary(c, "compat");
  sum["max"] = {{"J", r.J.max_norm()}, {"K", r.K.max_norm()}, {"L", r.L.max_norm()}, {"I", r.I.max_norm()}};
  sum["max_norm"] = r.max_norm();
  sum["tol"] = c.tol;
  return finish(c, "compat", std::move(sum), r.max_norm() <= c.tol);
}

RunResult run_defects(Context& c)
{
  if (!c.cfg.has_uniformity()) throw ConfigError("/uniformity", "defects needs a uniformity entry");
  const UniformityField u = sampled_uniformity(c.cfg);
  const DefectSet d = inhomogeneity_measures(u, c.geo);
  const TorsionSet t = torsion_restriction(d, u);
  const Connection3 conn = uniformity_connection(u);
  const TorsionSet direct = torsion(conn);
  CsvTable dt(c.cfg.grid);
  dt.add(d.Tmab, "T_mab").add(d.T3ab, "T_3ab").add(d.Tma3, "T_ma3").add(d.T3a3, "T_3a3");
  c.out.table("defects.csv", dt);
  CsvTable tt(c.cfg.grid);
  tt.add(t.T, "T");
  c.out.table("torsion.csv", tt);
  const double restriction = zip([](const Tensor3<3>& a, const Tensor3<3>& b) { return tensor_max(a - b); }, t.T, direct.T).max_norm();
  const double curvature = material_curvature(conn).map([](const Tensor4<3>& x) { return tensor_max(x); }).max_norm();
  json sum = base_summary(c, "defects");
  sum["max"] = {{"T_mab", d.Tmab.max_norm()}, {"T_3ab", d.T3ab.max_norm()}, {"T_ma3", d.Tma3.max_norm()},
                {"T_3a3", d.T3a3.max_norm()}, {"torsion", t.T.max_norm()}};
  sum["checks"] = {check("torsion_restriction", restriction, c.tol), check("material_flatness", curvature, c.tol)};
  return finish(c, "defects", std::move(sum), restriction <= c.tol && curvature <= c.tol);
}

json dual_path(const Context& c, const StrainSet& s, const IncompatibilitySet& res, IVariant v)
{
  const CurvatureIncompatibility ci =
      incompatibility_from_curvature(shell_curvature(c.geo, s, c.cfg.half_thickness), c.geo, s, v, &res);
  return {{"variant", to_string(v)},
          {"K_gap", gap(res.K, ci.set.K)},
          {"L_gap", gap(res.L, ci.set.L)},
          {"triple_residual", ci.triple.max_norm()}};
}

RunResult run_incompat(Context& c)
{
  const StrainSet s = scenario_strains(c);
  const IncompatibilitySet res = compatibility_residuals(c.geo, s);
  const CurvatureIncompatibility ci =
      incompatibility_from_curvature(shell_curvature(c.geo, s, c.cfg.half_thickness), c.geo, s, c.variant, &res);
  CsvTable t(s.grid());
  t.add(res.J, "J").add(res.K, "K").add(res.L, "L").add(res.I, "I").add(ci.set.K, "K_curvature").add(ci.set.L, "L_curvature");
  t.add(ci.triple, "triple");
  c.out.table("incompat.csv", t);
  json sum = base_summary(c, "incompat");
  sum["J_max"] = res.J.max_norm();
  sum["I_max"] = res.I.max_norm();
  sum["selected"] = to_string(c.variant);
  sum["variants"] = {dual_path(c, s, res, IVariant::rel3), dual_path(c, s, res, IVariant::remark)};
  const double kg = gap(res.K, ci.set.K), lg = gap(res.L, ci.set.L);
  json checks = {check("dual_path_K", kg, c.tol), check("dual_path_L", lg, c.tol)};
  bool pass = kg <= c.tol && lg <= c.tol;
  if (c.cfg.has_uniformity() && cartesian_reference(c.geo))
  {
    const TorsionSet tor = torsion(uniformity_connection(sampled_uniformity(c.cfg)));
    const CurvatureIncompatibility ti = incompatibility_rhs_from_torsion(c.geo, s, tor, c.variant, c.cfg.half_thickness, &res);
    const double tk = gap(res.K, ti.set.K), tl = gap(res.L, ti.set.L);
    checks.push_back(check("torsion_path_K", tk, c.tol));
    checks.push_back(check("torsion_path_L", tl, c.tol));
    pass = pass && tk <= c.tol && tl <= c.tol;
  }
  sum["tol"] = c.tol;
  sum["checks"] = std::move(checks);
  return finish(c, "incompat", std::move(sum), pass, "report.json");
}

RunResult run_reconstruct(Context& c)
{
  const StrainSet s = scenario_strains(c);
  const DirectedDeformation rec = reconstruct_surface(c.geo, s);
  CsvTable t(s.grid());
  t.add(rec.r, "r").add(rec.d, "d");
  c.out.table("deformed.csv", t);
  const double round_trip = strain_gap(strain_measures(c.geo, rec), s);
  json checks = {check("strain_round_trip", round_trip, c.tol)};
  bool pass = round_trip <= c.tol;
  if (c.cfg.has_deformation())
  {
    const double shape = rigid_fit_max(rec.r, sample3(*c.cfg.r, c.cfg.grid));
    checks.push_back(check("rigid_shape", shape, c.tol));
    pass = pass && shape <= c.tol;
  }
  json sum = base_summary(c, "reconstruct");
  sum["tol"] = c.tol;
  sum["checks"] = std::move(checks);
  return finish(c, "reconstruct", std::move(sum), pass);
}

TorsionSet plate_torsion(const PlateConfig& p, const ParamGrid& g)
{
  const Tensor3Field L = Tensor3Field::generate(g, [&](int i, int j) {
    Tensor3<3> T;
    for (int q = 0; q < 3; ++q)
    {
      const double v = p.T[static_cast<std::size_t>(q)].eval(g.theta1(i), g.theta2(j));
      T(q, 0, 1) = v;
      T(q, 1, 0) = -v;
    }
    return T;
  });
  return torsion(Connection3{L, Tensor3Field::zero(g)});
}

Mat2Function symmetric_function(const std::array<Expr, 3>& e)
{
  return [e](double t1, double t2) {
    const double off = e[1].eval(t1, t2);
    return (Mat2() << e[0].eval(t1, t2), off, off, e[2].eval(t1, t2)).finished();
  };
}

struct PlateRun
{
  PlateSolution sol;
  json checks;
  bool pass = true;
  json info;
};

PlateRun plate_run(const Context& c)
{
  if (!c.cfg.plate) throw ConfigError("/plate", "solve-plate needs a plate entry");
  const PlateConfig& p = *c.cfg.plate;
  const ParamGrid& g = c.cfg.grid;
  PlateOptions opt;
  opt.max_iterations = c.cfg.solver.max_iterations;
  opt.gradient_tol = c.cfg.solver.gradient_tol;
  opt.throw_on_failure = false;
  PlateBC bc = PlateBC::clamped(g);
  bc.kind = p.boundary;
  PlateRun run{PlateSolution{KLState::zero(g, c.cfg.material)}, json::array(), true, json::object()};
  std::optional<ManufacturedPlate> mp;
  switch (p.source)
  {
  case PlateConfig::Source::incompatibility:
  {
    PlateSource src = PlateSource::zero(g);
    src.K = p.K.sample(g);
    src.L = Vec2Field::generate(g, [&](int i, int j) {
      return Vec2(p.L[0].eval(g.theta1(i), g.theta2(j)), p.L[1].eval(g.theta1(i), g.theta2(j)));
    });
    run.sol = solve_plate(c.geo, p.mode, src, bc, c.cfg.material, opt);
    break;
  }
  case PlateConfig::Source::torsion:
    run.sol = solve_plate(c.geo, p.mode, plate_torsion(p, g), bc, c.cfg.material, opt);
    break;
  case PlateConfig::Source::manufactured:
    mp = manufacture_plate(g, p.mode, symmetric_function(p.E_star), symmetric_function(p.Lam_star), c.cfg.material);
    run.sol = solve_plate(c.geo, p.mode, mp->source, mp->bc, c.cfg.material, opt);
    break;
  }
  const PlateSolution& sol = run.sol;
  run.info = {{"mode", to_string(p.mode)},
              {"converged", sol.converged},
              {"stop_reason", sol.stop_reason},
              {"iterations", sol.log.size()},
              {"residual_max", sol.residual_max},
              {"monotone", monotone(sol.log)}};
  if (p.mode == PlateMode::pure_bending) run.info["multiplier_residual"] = sol.multiplier_residual;
  if (p.source == PlateConfig::Source::torsion) run.info["outer_iterations"] = sol.outer_iterations;
  run.checks.push_back({{"name", "converged"}, {"value", sol.converged}, {"pass", sol.converged}});
  run.pass = sol.converged;
  if (mp)
  {
    const double eL = gap(sol.state.Lam, mp->Lam);
    const double eE = gap(sol.state.E, mp->E);
    run.checks.push_back(check("recovery_Lambda", eL, c.cfg.solver.plate_tol));
    run.checks.push_back(check("recovery_E", eE, c.cfg.solver.plate_tol));
    run.checks.push_back({{"name", "monotone_log"}, {"value", monotone(sol.log)}, {"pass", monotone(sol.log)}});
    run.pass = run.pass && eL <= c.cfg.solver.plate_tol && eE <= c.cfg.solver.plate_tol && monotone(sol.log);
  }
  return run;
}

RunResult run_solve_plate(Context& c)
{
  PlateRun run = plate_run(c);
  const KLState& k = run.sol.state;
  const ScalarField psi = isotropic_kl_energy(k, c.geo).psi;
  CsvTable t(c.cfg.grid);
  t.add(k.E, "E").add(k.Lam, "Lambda").add(k.sigma, "sigma").add(k.M, "M").add(psi, "psi");
  c.out.table("state.csv", t);
  c.out.log("iterations.csv", run.sol.log);
  json sum = base_summary(c, "solve-plate");
  sum["solve"] = run.info;
  sum["checks"] = run.checks;
  return finish(c, "solve-plate", std::move(sum), run.pass);
}

RunResult run_verify(Context& c)
{
  json checks = json::array();
  json sum = base_summary(c, "verify");
  bool pass = true;
  auto add = [&](json ch) {
    pass = pass && ch["pass"].get<bool>();
    checks.push_back(std::move(ch));
  };
  const double hh = c.cfg.half_thickness;
  {
    const ShellMetric am = ambient_metric(c.geo, hh);
    add(check("ambient_flatness", riemann_at_midsurface(levi_civita(am), am).max_norm(), c.tol));
  }
  if (c.cfg.has_deformation() || c.cfg.has_strains())
  {
    const StrainSet s = scenario_strains(c);
    const IncompatibilitySet res = compatibility_residuals(c.geo, s);
    if (c.cfg.has_deformation()) add(check("forward_compatibility", res.max_norm(), c.tol));
    const json selected = dual_path(c, s, res, c.variant);
    add(check("dual_path_K", selected["K_gap"].get<double>(), c.tol));
    add(check("dual_path_L", selected["L_gap"].get<double>(), c.tol));
    sum["variants"] = {{"selected", to_string(c.variant)},
                       {"J_max", res.J.max_norm()},
                       {"results", {dual_path(c, s, res, IVariant::rel3), dual_path(c, s, res, IVariant::remark)}}};
    if (res.max_norm() <= c.tol)
    {
      const DirectedDeformation rec = reconstruct_surface(c.geo, s);
      add(check("reconstruction_round_trip", strain_gap(strain_measures(c.geo, rec), s), c.tol));
      if (c.cfg.has_deformation()) add(check("reconstruction_shape", rigid_fit_max(rec.r, sample3(*c.cfg.r, c.cfg.grid)), c.tol));
    }
  }
  if (c.cfg.has_uniformity())
  {
    const UniformityField u = sampled_uniformity(c.cfg);
    const Connection3 conn = uniformity_connection(u);
    add(check("material_flatness", material_curvature(conn).map([](const Tensor4<3>& x) { return tensor_max(x); }).max_norm(), c.tol));
    const bool cartesian = cartesian_reference(c.geo);
    const TorsionSet tor = torsion(conn);
    if (cartesian)
    {
      add(check("nonmetricity", nonmetricity(pulled_back_jet(u, c.geo), conn).map([](const Tensor3<3>& x) { return tensor_max(x); }).max_norm(),
                c.tol));
      const StrainSet s = strains_from_bases(cosserat_bases(u, c.geo), c.geo);
      add(check("torsion_rhs",
                curvature_gap(shell_curvature(c.geo, s, hh), torsion_curvature_rhs(metric_jet(build_metric(c.geo, s, hh)), tor)), c.tol));
    }
    const TorsionSet restricted = torsion_restriction(inhomogeneity_measures(u, c.geo), u);
    add(check("torsion_restriction",
              zip([](const Tensor3<3>& a, const Tensor3<3>& b) { return tensor_max(a - b); }, restricted.T, tor.T).max_norm(), c.tol));
    const UniformityField back = integrate_uniformity(conn, u.H[0]);
    add(check("integrate_round_trip", gap(back.H, u.H), c.tol));
  }
  if (c.cfg.plate)
  {
    PlateRun run = plate_run(c);
    for (auto& ch : run.checks)
    {
      ch["name"] = "plate_" + ch["name"].get<std::string>();
      add(ch);
    }
    sum["plate"] = run.info;
  }
  sum["tol"] = c.tol;
  sum["checks"] = std::move(checks);
  return finish(c, "verify", std::move(sum), pass, "verify.json");
}

using Command = RunResult (*)(Context&);

const std::map<std::string, Command>& commands()
{
  static const std::map<std::string, Command> table{
      {"geom", run_geom},       {"strains", run_strains},         {"compat", run_compat},
      {"defects", run_defects}, {"incompat", run_incompat},       {"reconstruct", run_reconstruct},
      {"solve-plate", run_solve_plate}, {"verify", run_verify}};
  return table;
}

} // namespace

const std::vector<std::string>& command_names()
{
  static const std::vector<std::string> names{"geom", "strains", "compat", "defects", "incompat", "reconstruct", "solve-plate", "verify"};
  return names;
}

double effective_tolerance(const ScenarioConfig& cfg, const RunOptions& opt)
{
  if (opt.tol) return *opt.tol;
  if (cfg.solver.tol) return *cfg.solver.tol;
  const double h = std::max(cfg.grid.h1(), cfg.grid.h2());
  return cfg.solver.order_c * h * h;
}

RunResult run_command(const std::string& command, const ScenarioConfig& cfg, const RunOptions& opt)
{
  const auto it = commands().find(command);
  if (it == commands().end()) throw ConfigError("", "unknown command '" + command + "'");
  if (opt.tol && !(*opt.tol > 0.0)) throw ConfigError("--tol", "tolerance must be positive");
  Context c = make_context(cfg, opt);
  return it->second(c);
}

} // namespace dshell::app

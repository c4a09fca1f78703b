#include <doctest.h>

#include <sstream>

#include "commands.hpp"
#include "dshell/io.hpp"

using namespace dshell;
using namespace dshell::app;
using nlohmann::json;

namespace
{

json minimal()
{
  return json::parse(R"({"name": "t", "grid": {"t1": [0, 1], "t2": [0, 2], "n1": 5, "n2": 9}, "chart": ["t1", "t2", 0]})");
}

std::string where_of(const json& doc)
{
  try
  {
    (void)parse_scenario(doc);
  }
  catch (const ConfigError& e)
  {
    return e.where();
  }
  return "accepted";
}

} // namespace

TEST_CASE("minimal scenario and defaults")
{
  const ScenarioConfig c = parse_scenario(minimal());
  CHECK(c.name == "t");
  CHECK(c.grid.n1() == 5);
  CHECK(c.grid.n2() == 9);
  CHECK(c.half_thickness == 0.05);
  CHECK(c.solver.variant == IVariant::remark);
  CHECK_FALSE(c.has_deformation());
  CHECK_FALSE(c.has_strains());
  CHECK_FALSE(c.has_uniformity());
  CHECK(effective_tolerance(c, {}) == doctest::Approx(20.0 * 0.25 * 0.25));
  RunOptions o;
  o.tol = 1e-3;
  CHECK(effective_tolerance(c, o) == 1e-3);
}

TEST_CASE("invalid entries are located by JSON pointer")
{
  json d = minimal();
  d["extra"] = 1;
  CHECK(where_of(d) == "/extra");

  d = minimal();
  d["grid"]["n"] = 4;
  CHECK(where_of(d) == "/grid/n");

  d = minimal();
  d["chart"][1] = "t2 +";
  CHECK(where_of(d) == "/chart/1");

  d = minimal();
  d["chart"][2] = "log(t1 - 2)";
  CHECK(where_of(d) == "/chart/2");

  d = minimal();
  d["deformation"] = {{"r", {"t1", "t2", 0}}, {"d", {0, 0, 1}}};
  d["strains"] = {{"Delta", 0.1}};
  CHECK(where_of(d) == "");

  d = minimal();
  d["strains"] = {{"file", "no-such-file.csv"}};
  CHECK(where_of(d) == "/strains/file");

  d = minimal();
  d["material"] = {{"nu", 0.7}};
  CHECK(where_of(d) == "/material");

  d = minimal();
  d["solver"] = {{"tol", -1.0}};
  CHECK(where_of(d) == "/solver/tol");

  d = minimal();
  d["solver"] = {{"variant", "rel4"}};
  CHECK(where_of(d) == "/solver/variant");

  d = minimal();
  d["plate"] = {{"mode", "pure_bending"}, {"source", {{"K", 0.1}}}, {"torsion", {{"T", {0, 0, 0}}}}};
  CHECK(where_of(d) == "/plate/source");

  d = minimal();
  d["plate"] = {{"mode", "pure_bending"}, {"boundary", "traction_free"}, {"manufactured", {{"Lambda", {0, 0, 0}}}}};
  CHECK(where_of(d) == "/plate/boundary");
}

TEST_CASE("strain expressions reach the commands")
{
  json d = minimal();
  d["strains"] = {{"E", {"0.1*t1", 0, 0}}, {"Delta", "0.2"}};
  const ScenarioConfig c = parse_scenario(d);
  REQUIRE(c.has_strains());
  CHECK(c.strains->E[0].eval(0.5, 0.0) == doctest::Approx(0.05));
  CHECK(c.strains->del.eval(0.0, 0.0) == doctest::Approx(0.2));
  CHECK(c.strains->Lam[3].eval(0.3, 0.3) == 0.0);
}

TEST_CASE("CSV table round trip")
{
  const ParamGrid g({0.0, 1.0}, {0.0, 2.0}, 6, 5);
  const Mat2Field m = Mat2Field::generate(g, [&](int i, int j) {
    return (Mat2() << 0.1 * i, 1.0 / 3.0 * j, -2.5e-17, std::sqrt(2.0) * i * j).finished();
  });
  const ScalarField s = ScalarField::generate(g, [&](int i, int j) { return std::exp(0.1 * i - j); });
  CsvTable t(g);
  t.add(m, "E").add(s, "Delta");
  std::ostringstream os;
  t.write(os);
  std::istringstream is(os.str());
  const CsvData csv = read_csv(is);
  CHECK(csv.header.front() == "i");
  CHECK(csv.has("E_21"));
  const Mat2Field m2 = field_from_csv<Mat2>(csv, g, "E");
  const ScalarField s2 = field_from_csv<double>(csv, g, "Delta");
  for (std::size_t k = 0; k < g.node_count(); ++k)
  {
    CHECK(m2[k] == m[k]);
    CHECK(s2[k] == s[k]);
  }
  CHECK_THROWS_AS(field_from_csv<double>(csv, ParamGrid({0.0, 1.0}, {0.0, 2.0}, 6, 6), "Delta"), Error);
  CHECK_THROWS_AS(field_from_csv<double>(csv, g, "Lambda"), Error);
  CHECK(t.manifest("x.csv")["fields"].size() == 2);

  std::istringstream bad("i,j,t1,t2,x\n0,0,0,0,abc\n");
  CHECK_THROWS_WITH_AS(read_csv(bad), doctest::Contains("line 2"), Error);
}

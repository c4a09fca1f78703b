#include <doctest.h>

#include <random>

#include "dshell/expr.hpp"
#include "random_expr.hpp"
#include "shunting_yard.hpp"

using namespace dshell;

namespace
{

double ev(const char* s, double t1 = 0, double t2 = 0, double z = 0) { return Expr::parse(s).eval(t1, t2, z); }

} // namespace

TEST_CASE("basic evaluation")
{
  CHECK(ev("7") == 7.0);
  CHECK(ev("t1 + 2*t2", 0.5, 1.0) == 2.5);
  CHECK(ev("t1*t2", 2, 3) == 6.0);
  CHECK(std::abs(ev("exp(t1)", 1) - std::exp(1.0)) < 1e-12);
  CHECK(std::abs(ev("exp(t1)", 1) - 2.718281828459045) < 1e-12);
  for (double t : {-3.0, -0.2, 0.0, 0.7, 11.0}) CHECK(std::abs(ev("sin(t1)^2 + cos(t1)^2", t) - 1.0) < 1e-14);
  CHECK(ev("zeta * 2", 0, 0, 1.5) == 3.0);
}

TEST_CASE("precedence and associativity")
{
  struct Case
  {
    const char* src;
    double value;
  };
  const Case cases[] = {
      {"2+3*4", 14},         {"2^3^2", 512},         {"-2^2", -4},          {"(-2)^2", 4},
      {"-t1^2", -9},         {"2*3^2", 18},          {"2^-1", 0.5},         {"2^-1^2", 0.5},
      {"8/4/2", 1},          {"8-4-2", 2},           {"2*3/4", 1.5},        {"--2", 2},
      {"-2*3", -6},          {"2*-3", -6},           {"1-2+3", 2},          {"(1+2)*3", 9},
      {"2^2*3", 12},         {"3*2^2", 12},          {"-3^2*2", -18},       {"4^0.5", 2},
      {"2^(1+2)", 8},        {"10-2*3^2", -8},       {"1/2^2", 0.25},       {"-(2+3)", -5},
      {" 2 ^ 3 ^ 0 ", 2},    {"abs(-3)^2", 9},       {"2^3^2/512", 1},      {"- 2 ^ - 2", -0.25},
  };
  for (const auto& c : cases)
  {
    CAPTURE(c.src);
    CHECK(ev(c.src, 3.0) == c.value);
    CHECK(oracle::evaluate(c.src, 3.0, 0, 0) == c.value);
  }
}

TEST_CASE("parse errors carry position and expectation")
{
  try
  {
    (void)Expr::parse("1 + * 2");
    FAIL("expected ParseError");
  }
  catch (const ParseError& e)
  {
    CHECK(e.position() == 4);
    CHECK(std::string(e.what()).find("expected") != std::string::npos);
  }
  try
  {
    (void)Expr::parse("t1 + foo(2)");
    FAIL("expected ParseError");
  }
  catch (const ParseError& e)
  {
    CHECK(e.position() == 5);
    CHECK(std::string(e.what()).find("foo") != std::string::npos);
  }
  CHECK_THROWS_AS((void)Expr::parse(""), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("(1+2"), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("1 2"), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("x"), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("sin 2"), ParseError);
}

TEST_CASE("domain errors name the subexpression")
{
  try
  {
    (void)ev("1 + log(t1 - 1)", 0.5);
    FAIL("expected DomainError");
  }
  catch (const DomainError& e)
  {
    CHECK(std::string(e.what()).find("log((t1 - 1))") != std::string::npos);
  }
  CHECK_THROWS_AS((void)ev("1/(t1-t1)", 2.0), DomainError);
  CHECK_THROWS_AS((void)ev("sqrt(-1)"), DomainError);
  CHECK_THROWS_AS((void)ev("(-2)^0.5"), DomainError);
}

TEST_CASE("agrees with an independent shunting-yard evaluator")
{
  fixtures::RandomExpr gen(1234567);
  std::mt19937_64 pts(99);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  int compared = 0;
  for (int k = 0; k < 100; ++k)
  {
    const std::string s = gen.make(4);
    CAPTURE(s);
    const Expr e = Expr::parse(s);
    const double t1 = u(pts), t2 = u(pts), z = u(pts) - 1.0;
    const double ref = oracle::evaluate(s, t1, t2, z);
    if (!std::isfinite(ref))
    {
      CHECK_THROWS_AS((void)e.eval(t1, t2, z), DomainError);
      continue;
    }
    const double got = e.eval(t1, t2, z);
    CHECK(std::abs(got - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
    ++compared;
  }
  CHECK(compared >= 60);
}

TEST_CASE("print round-trips")
{
  fixtures::RandomExpr gen(777);
  std::mt19937_64 pts(4242);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  int points = 0;
  while (points < 1000)
  {
    const Expr e = Expr::parse(gen.make(4));
    const Expr back = Expr::parse(e.print());
    CHECK(back.print() == e.print());
    for (int k = 0; k < 10; ++k, ++points)
    {
      const double t1 = u(pts), t2 = u(pts), z = u(pts) - 1.0;
      double a = 0, b = 0;
      bool fa = false, fb = false;
      try
      {
        a = e.eval(t1, t2, z);
      }
      catch (const DomainError&)
      {
        fa = true;
      }
      try
      {
        b = back.eval(t1, t2, z);
      }
      catch (const DomainError&)
      {
        fb = true;
      }
      REQUIRE(fa == fb);
      if (!fa) REQUIRE(a == b);
    }
  }
}

TEST_CASE("variable dependence and sampling")
{
  CHECK(Expr::parse("t1 + zeta").depends_on("zeta"));
  CHECK_FALSE(Expr::parse("t1 + t2").depends_on("zeta"));
  CHECK(Expr::parse("2*3").is_constant());
  const ParamGrid g({0, 1}, {0, 1}, 5, 5);
  const auto f = Expr::parse("t1 + 10*t2").sample(g);
  CHECK(f(2, 3) == doctest::Approx(0.5 + 7.5));
  CHECK_THROWS_AS((void)Expr::parse("log(t1)").sample(g), DomainError);
}

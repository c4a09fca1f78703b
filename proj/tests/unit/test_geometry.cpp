#include <doctest.h>

#include <cmath>
#include <random>

#include "dshell/geometry.hpp"
#include "fixtures.hpp"

using namespace dshell;
using fixtures::max_over;

namespace
{

StrainSet smooth_strains(const ParamGrid& g, double amp)
{
  auto f = [&](int k, int i, int j) { return amp * std::sin(0.5 + k + (k % 3 + 1) * g.theta1(i) - (k % 2 + 1) * g.theta2(j)); };
  StrainSet s = StrainSet::zero(g);
  s.E = Mat2Field::generate(g, [&](int i, int j) { return (Mat2() << f(0, i, j), f(1, i, j), f(1, i, j), f(2, i, j)).finished(); });
  s.Lam = Mat2Field::generate(g, [&](int i, int j) { return (Mat2() << f(3, i, j), f(4, i, j), f(5, i, j), f(6, i, j)).finished(); });
  s.lam = Vec2Field::generate(g, [&](int i, int j) { return Vec2(f(7, i, j), f(8, i, j)); });
  s.Del = Vec2Field::generate(g, [&](int i, int j) { return Vec2(f(9, i, j), f(10, i, j)); });
  s.del = ScalarField::generate(g, [&](int i, int j) { return f(11, i, j); });
  return s;
}

// X_{pij} antisymmetric in (p, i), so g + X-built connection stays metric.
Tensor3<3> skew_lowered(double t1, double t2, double scale)
{
  Tensor3<3> x;
  for (int p = 0; p < 3; ++p)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
      {
        const double base = std::sin(1.0 + p + 2 * i + 3 * j + t1 * (j + 1)) * std::cos(t2 * (p + 1) - i);
        const double swapped = std::sin(1.0 + i + 2 * p + 3 * j + t1 * (j + 1)) * std::cos(t2 * (i + 1) - p);
        x(p, i, j) = scale * (base - swapped);
      }
  return x;
}

Tensor3<3> raise_first(const Mat3& ginv, const Tensor3<3>& x)
{
  Tensor3<3> out;
  for (int p = 0; p < 3; ++p)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
      {
        double v = 0.0;
        for (int q = 0; q < 3; ++q) v += ginv(p, q) * x(q, i, j);
        out(p, i, j) = v;
      }
  return out;
}

double tmax(const Tensor3<3>& t)
{
  double m = 0.0;
  for (double v : t.c) m = std::max(m, std::abs(v));
  return m;
}

double tmax(const Tensor4<3>& t)
{
  double m = 0.0;
  for (double v : t.c) m = std::max(m, std::abs(v));
  return m;
}

struct MetricConnection
{
  ShellMetric m;
  Connection3 lc;
  Connection3 L;
  Tensor3Field C;
  Tensor3Field Cdz;
};

MetricConnection metric_connection(int n)
{
  const auto geo = fundamental_forms(fixtures::sphere(1.2, n));
  const ParamGrid& g = geo.grid();
  ShellMetric m = build_metric(geo, smooth_strains(g, 0.03), 0.05);
  Connection3 lc = levi_civita(m);
  const Mat3Field g0 = metric_eval(m, 0.0);
  const Mat3Field gi = invert3(g0);
  const Mat3Field gdz = metric_dzeta(m, 0.0);
  Tensor3Field C = Tensor3Field::generate(g, [&](int i, int j) {
    return raise_first(gi(i, j), skew_lowered(g.theta1(i), g.theta2(j), 0.1));
  });
  // lowered X is taken zeta-independent, so only the inverse metric varies
  Tensor3Field Cdz = Tensor3Field::generate(g, [&](int i, int j) {
    const Mat3 dgi = -gi(i, j) * gdz(i, j) * gi(i, j);
    return raise_first(dgi, skew_lowered(g.theta1(i), g.theta2(j), 0.1));
  });
  Connection3 L{zip([](const Tensor3<3>& a, const Tensor3<3>& b) { return a + b; }, lc.L, C),
                zip([](const Tensor3<3>& a, const Tensor3<3>& b) { return a + b; }, lc.Ldz, Cdz)};
  return {std::move(m), std::move(lc), std::move(L), std::move(C), std::move(Cdz)};
}

double ambient_curvature_error(const SurfaceChart& chart)
{
  const auto geo = fundamental_forms(chart);
  const auto m = ambient_metric(geo, 0.05);
  return riemann_at_midsurface(levi_civita(m), m).max_norm();
}

} // namespace

TEST_CASE("flat chart has vanishing connection and curvature")
{
  const auto geo = fundamental_forms(fixtures::flat(11));
  const auto m = ambient_metric(geo, 0.1);
  const auto lc = levi_civita(m);
  CHECK(lc.L.map([](const Tensor3<3>& t) { return tmax(t); }).max_norm() < 1e-12);
  CHECK(lc.Ldz.map([](const Tensor3<3>& t) { return tmax(t); }).max_norm() < 1e-12);
  CHECK(riemann_at_midsurface(lc, m).max_norm() < 1e-9);
}

TEST_CASE("ambient Levi-Civita symbols reproduce the surface data at zeta = 0")
{
  const auto geo = fundamental_forms(fixtures::sphere(1.3, 41));
  const auto m = ambient_metric(geo, 0.1);
  const auto lc = levi_civita(m);
  const auto s = surface_christoffels(geo.A);
  const ParamGrid& g = geo.grid();
  const double tol = fixtures::order_tol(g);
  // Gamma^3_ab = B_ab, Gamma^a_b3 = -B^a_b, Gamma^a_bc = surface symbols
  CHECK(max_over(g, [&](int i, int j) {
          double e = 0.0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) e = std::max(e, std::abs(lc.L(i, j)(2, a, b) - geo.B(i, j)(a, b)));
          return e;
        }) < tol);
  const Mat2Field Bm = geo.B_mixed();
  CHECK(max_over(g, [&](int i, int j) {
          double e = 0.0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) e = std::max(e, std::abs(lc.L(i, j)(a, b, 2) + Bm(i, j)(a, b)));
          return e;
        }) < tol);
  CHECK(max_over(g, [&](int i, int j) {
          double e = 0.0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              for (int c = 0; c < 2; ++c) e = std::max(e, std::abs(lc.L(i, j)(a, b, c) - s.upper(i, j)(a, b, c)));
          return e;
        }) < 1e-12);
}

TEST_CASE("ambient curvature vanishes at second order on the sphere")
{
  auto chart = [](int n) { return fixtures::sphere(1.0, n); };
  const double e1 = ambient_curvature_error(chart(21));
  const double e2 = ambient_curvature_error(chart(41));
  CAPTURE(e1);
  CAPTURE(e2);
  CHECK(e2 < fixtures::order_tol(chart(41).grid));
  CHECK(std::log2(e1 / e2) > 1.9);
}

TEST_CASE("ambient curvature of the cylinder is at round-off")
{
  // metric data is constant in theta up to discretisation; only cancellation noise remains
  CHECK(ambient_curvature_error(fixtures::cylinder(21)) < 1e-8);
  CHECK(ambient_curvature_error(fixtures::cylinder(41)) < 1e-8);
}

TEST_CASE("Riemann symmetries hold for the rebuilt tensor")
{
  const auto mc = metric_connection(15);
  const Curvature3 k = riemann_at_midsurface(mc.lc, mc.m);
  const Tensor4Field full = k.full();
  const Tensor4Field direct = lower_first(material_curvature(mc.lc), metric_eval(mc.m, 0.0));
  // metric connection: lowered tensor is antisymmetric in both pairs, so full() matches the
  // direct evaluation up to the pair-exchange defect, which is a discretisation error
  const double tol = fixtures::order_tol(mc.m.grid(), 200.0);
  CHECK(max_over(mc.m.grid(), [&](int i, int j) { return tmax(full(i, j) - direct(i, j)); }) < tol);
  CHECK(max_over(mc.m.grid(), [&](int i, int j) {
          const Tensor4<3>& t = full(i, j);
          double e = 0.0;
          for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
              for (int c = 0; c < 3; ++c)
                for (int d = 0; d < 3; ++d)
                  e = std::max({e, std::abs(t(a, b, c, d) + t(b, a, c, d)), std::abs(t(a, b, c, d) - t(c, d, a, b))});
          return e;
        }) == 0.0);
}

TEST_CASE("axial torsion round trip is exact")
{
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const ParamGrid g({0, 1}, {0, 1}, 6, 5);
  const Mat3Field axial = Mat3Field::generate(g, [&](int, int) { return Mat3(Mat3::NullaryExpr([&](Eigen::Index, Eigen::Index) { return u(rng); })); });
  const Tensor3Field T = torsion_from_axial(axial);
  const Connection3 c{T, Tensor3Field::zero(g)};
  const TorsionSet ts = torsion(c);
  CHECK(max_over(g, [&](int i, int j) { return (ts.axial(i, j) - axial(i, j)).cwiseAbs().maxCoeff(); }) < 1e-14);
  CHECK(max_over(g, [&](int i, int j) {
          double e = 0.0;
          for (int p = 0; p < 3; ++p)
            for (int a = 0; a < 3; ++a)
              for (int b = 0; b < 3; ++b) e = std::max(e, std::abs(ts.T(i, j)(p, a, b) + ts.T(i, j)(p, b, a)));
          return e;
        }) == 0.0);
}

TEST_CASE("metric connection: contortion equals L minus Levi-Civita and is metric")
{
  const auto mc = metric_connection(17);
  const ParamGrid& g = mc.m.grid();
  const TorsionSet ts = torsion(mc.L);
  const Tensor3Field C = contortion(ts, mc.m, 0.0);
  const Tensor3Field Cdz = contortion_dzeta(ts, mc.m);
  CHECK(max_over(g, [&](int i, int j) { return tmax(C(i, j) - mc.C(i, j)); }) < 1e-12);
  CHECK(max_over(g, [&](int i, int j) { return tmax(Cdz(i, j) - mc.Cdz(i, j)); }) < 1e-12);
  CHECK(nonmetricity(mc.m, mc.L).map([](const Tensor3<3>& t) { return tmax(t); }).max_norm() < 1e-12);
  CHECK(nonmetricity(mc.m, mc.lc).map([](const Tensor3<3>& t) { return tmax(t); }).max_norm() < 1e-12);
}

TEST_CASE("contortion derivative matches a finite difference in zeta")
{
  const auto mc = metric_connection(9);
  TorsionSet ts = torsion(mc.L);
  const double dz = 1e-5;
  const Tensor3Field cp = contortion(ts, mc.m, dz);
  const Tensor3Field cm = contortion(ts, mc.m, -dz);
  const Tensor3Field cd = contortion_dzeta(ts, mc.m);
  CHECK(max_over(mc.m.grid(), [&](int i, int j) { return tmax((0.5 / dz) * (cp(i, j) - cm(i, j)) - cd(i, j)); }) < 1e-8);
}

TEST_CASE("curvature decomposition R(L) = K + Xi holds to round-off")
{
  const auto mc = metric_connection(13);
  const Tensor4Field R = material_curvature(mc.L);
  const Tensor4Field KX = curvature_decomposition_residual(mc.m, torsion(mc.L));
  CHECK(max_over(mc.m.grid(), [&](int i, int j) { return tmax(R(i, j) - KX(i, j)); }) < 1e-10);
}

#include <doctest.h>

#include "dshell/surface.hpp"
#include "fixtures.hpp"

using namespace dshell;
using fixtures::max_over;
using fixtures::order_tol;

TEST_CASE("flat chart has trivial fundamental forms")
{
  const auto geo = fundamental_forms(fixtures::flat(9));
  CHECK((geo.A[0] - Mat2::Identity()).norm() < 1e-12);
  CHECK(geo.B.max_norm() < 1e-12);
  CHECK(geo.C.max_norm() < 1e-12);
  CHECK((geo.N[5] - Vec3(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("sphere: metric and shape operator")
{
  const double rho = 2.0;
  const auto chart = fixtures::sphere(rho);
  const auto geo = fundamental_forms(chart);
  const auto& g = chart.grid;
  const double tol = order_tol(g);
  CHECK(max_over(g, [&](int i, int j) { return geo.A(i, j)(0, 0) - rho * rho; }) < tol);
  CHECK(max_over(g, [&](int i, int j) { return geo.A(i, j)(0, 1); }) < tol);
  CHECK(max_over(g, [&](int i, int j) {
          const double s = std::sin(g.theta1(i));
          return geo.A(i, j)(1, 1) - rho * rho * s * s;
        }) < tol);
  // Outward normal: B = -A / rho.
  CHECK(max_over(g, [&](int i, int j) { return (geo.B(i, j) + geo.A(i, j) / rho).cwiseAbs().maxCoeff(); }) < tol);
  CHECK(max_over(g, [&](int i, int j) { return (geo.C(i, j) - geo.A(i, j) / (rho * rho)).cwiseAbs().maxCoeff(); }) <
        tol);
  for (std::size_t k = 0; k < g.node_count(); ++k)
  {
    CHECK(std::abs(geo.N[k].norm() - 1.0) < 1e-12);
    CHECK(std::abs(geo.N[k].dot(geo.A1[k])) < 1e-10);
    CHECK(std::abs(geo.N[k].dot(geo.A2[k])) < 1e-10);
    CHECK(geo.C[k](0, 1) == geo.C[k](1, 0));
  }
}

TEST_CASE("cylinder: developable")
{
  const auto chart = fixtures::cylinder();
  const auto geo = fundamental_forms(chart);
  const double tol = order_tol(chart.grid);
  for (std::size_t k = 0; k < chart.grid.node_count(); ++k)
  {
    CHECK((geo.A[k] - Mat2::Identity()).cwiseAbs().maxCoeff() < tol);
    CHECK(std::abs(geo.B[k](0, 0) + 1.0) < tol);
    CHECK(std::abs(geo.B[k](0, 1)) < tol);
    CHECK(std::abs(geo.B[k](1, 1)) < tol);
    CHECK(std::abs(geo.B[k].determinant()) < tol);
  }
}

TEST_CASE("degenerate chart is rejected with the node")
{
  const SurfaceChart bad{[](double t1, double t2) { return Vec3(t1, t1 * 0 + t2 * 0, 0); }, ParamGrid({0, 1}, {0, 1}, 5, 5)};
  CHECK_THROWS_AS((void)fundamental_forms(bad), NumericalError);
}

TEST_CASE("surface Christoffel symbols")
{
  const ParamGrid g({0.4, 1.2}, {0, 0.8}, 41, 41);
  const auto flat = surface_christoffels(Mat2Field::constant(g, Mat2::Identity()));
  CHECK(flat.lower.max_norm() < 1e-12);
  CHECK(flat.upper.max_norm() < 1e-12);

  const auto a = Mat2Field::generate(g, [&](int i, int) {
    const double s = std::sin(g.theta1(i));
    Mat2 m;
    m << 1, 0, 0, s * s;
    return m;
  });
  const auto sc = surface_christoffels(a);
  CHECK(max_over(g, [&](int i, int j) {
          const double t = g.theta1(i);
          return sc.upper(i, j)(0, 1, 1) + std::sin(t) * std::cos(t);
        }) < order_tol(g));
  CHECK(max_over(g, [&](int i, int j) {
          const double t = g.theta1(i);
          return sc.upper(i, j)(1, 0, 1) - std::cos(t) / std::sin(t);
        }) < order_tol(g));
  for (std::size_t k = 0; k < g.node_count(); ++k)
    for (int s = 0; s < 2; ++s) CHECK(sc.upper[k](s, 0, 1) == sc.upper[k](s, 1, 0));
}

TEST_CASE("2-d curvature")
{
  const ParamGrid g({0.4, 1.2}, {0, 0.8}, 41, 41);
  CHECK(riemann2d(Mat2Field::constant(g, Mat2::Identity())).max_norm() < 1e-10);
  auto sphere_err = [](int n) {
    const ParamGrid gg({0.4, 1.2}, {0, 0.8}, n, n);
    const auto a = Mat2Field::generate(gg, [&](int i, int) {
      const double s = std::sin(gg.theta1(i));
      Mat2 m;
      m << 1, 0, 0, s * s;
      return m;
    });
    const auto S = riemann2d(a);
    return max_over(gg, [&](int i, int j) { return S(i, j) - std::pow(std::sin(gg.theta1(i)), 2); });
  };
  const double e1 = sphere_err(41), e2 = sphere_err(81);
  CHECK(e1 < order_tol(g));
  CHECK(std::log2(e1 / e2) > 1.8);

  const auto cyl = fundamental_forms(fixtures::cylinder());
  CHECK(riemann2d(cyl.A).max_norm() < order_tol(cyl.grid()));
}

TEST_CASE("Gauss equation and Weingarten formula on embedded charts")
{
  for (const auto& chart : {fixtures::sphere(1.5), fixtures::cylinder()})
  {
    const auto geo = fundamental_forms(chart);
    const auto& g = chart.grid;
    const auto S = riemann2d(geo.A);
    CHECK(max_over(g, [&](int i, int j) { return S(i, j) - geo.B(i, j).determinant(); }) < order_tol(g));
    const auto Bm = geo.B_mixed();
    const VecField dn[2] = {partial(geo.N, 1), partial(geo.N, 2)};
    for (int be = 0; be < 2; ++be)
      CHECK(max_over(g, [&](int i, int j) {
              const Vec3 w = -(Bm(i, j)(0, be) * geo.A1(i, j) + Bm(i, j)(1, be) * geo.A2(i, j));
              return (w - dn[be](i, j)).cwiseAbs().maxCoeff();
            }) < order_tol(g));
  }
}

TEST_CASE("covariant derivative of a metric vanishes")
{
  const auto geo = fundamental_forms(fixtures::sphere());
  const auto s = surface_christoffels(geo.A);
  const auto dA = covariant_derivative(geo.A, s);
  CHECK(dA.max_norm() < order_tol(geo.grid()));
}

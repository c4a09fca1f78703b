#pragma once

// Analytic charts and tolerance constants shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dshell/shellmetric.hpp"
#include "dshell/surface.hpp"

namespace fixtures
{

using dshell::ParamGrid;
using dshell::SurfaceChart;
using dshell::Mat3;
using dshell::Vec3;

// Second-order thresholds are kOrderC * max(h1, h2)^2.
inline constexpr double kOrderC = 20.0;

inline double order_tol(const ParamGrid& g, double c = kOrderC)
{
  const double h = std::max(g.h1(), g.h2());
  return c * h * h;
}

inline SurfaceChart flat(int n = 41)
{
  return {[](double t1, double t2) { return Vec3(t1, t2, 0.0); }, ParamGrid({0, 1}, {0, 1}, n, n)};
}

inline SurfaceChart sphere(double rho = 1.0, int n = 41)
{
  return {[rho](double t1, double t2) {
            return Vec3(rho * std::sin(t1) * std::cos(t2), rho * std::sin(t1) * std::sin(t2), rho * std::cos(t1));
          },
          ParamGrid({0.4, 1.2}, {0.0, 0.8}, n, n)};
}

inline SurfaceChart cylinder(int n = 41)
{
  return {[](double t1, double t2) { return Vec3(std::cos(t1), std::sin(t1), t2); }, ParamGrid({0, 1}, {0, 1}, n, n)};
}

using UniformityMap = std::function<Mat3(double, double, double)>;

struct NamedUniformity
{
  std::string name;
  UniformityMap H;
};

inline Mat3 rotation_z(double phi)
{
  Mat3 m;
  m << std::cos(phi), -std::sin(phi), 0, std::sin(phi), std::cos(phi), 0, 0, 0, 1;
  return m;
}

// Shell-form fields: columns 1, 2 linear in zeta, column 3 zeta-independent.
inline std::vector<NamedUniformity> shell_uniformities()
{
  return {
      {"twist", [](double t1, double t2, double z) {
         Mat3 m = rotation_z(0.6 * t1 + 0.2 * t2 * t2);
         m.col(0) += z * Vec3(0.1 * t2, 0.3, -0.2 * std::sin(t1));
         m.col(1) += z * Vec3(-0.2, 0.1 * t1, 0.15 * t2);
         m.col(2) += Vec3(0.1 * std::sin(t2), 0.05 * t1 * t2, 0.0);
         return m;
       }},
      {"shear", [](double t1, double t2, double z) {
         Mat3 m = Mat3::Identity();
         m(0, 1) = 0.3 * std::sin(t1 + t2);
         m(1, 0) = 0.2 * t1 * t2;
         m(2, 0) = 0.25 * t2 + z * 0.1 * t1;
         m(2, 1) = -0.1 * t1 * t1 + z * 0.2;
         m(0, 0) = std::exp(0.3 * t2) + z * 0.2 * std::cos(t2);
         m(1, 1) = 1.0 + 0.2 * t1 - z * 0.3 * t1 * t2;
         m(0, 2) = 0.1 * std::cos(t1);
         m(2, 2) = 1.0 + 0.1 * t1 * t2;
         return m;
       }},
      {"stretch", [](double t1, double t2, double z) {
         Mat3 m = Mat3::Zero();
         m(0, 0) = 1.0 + 0.3 * t1 + z * (0.2 + 0.1 * t2);
         m(1, 1) = 1.0 / (1.0 + 0.2 * t2 * t2) + z * 0.15 * t1;
         m(2, 2) = 1.0 + 0.2 * std::sin(t1 * t2);
         m(1, 2) = 0.1 * t1;
         m(2, 0) = z * 0.3 * t2;
         return m;
       }},
  };
}

// General fields with nonlinear zeta dependence.
inline std::vector<NamedUniformity> general_uniformities()
{
  auto out = shell_uniformities();
  out.push_back({"bulge", [](double t1, double t2, double z) {
                   Mat3 m = rotation_z(0.4 * std::sin(t1 * t2 + z));
                   m(2, 2) = std::exp(0.2 * t1 + 0.3 * z * z);
                   m(0, 2) = 0.1 * z * z + 0.1 * t2;
                   m(2, 1) = 0.2 * std::sin(z + t1);
                   return m;
                 }});
  return out;
}

using VecMap = std::function<Vec3(double, double)>;

struct DeformationFixture
{
  std::string name;
  SurfaceChart reference;
  VecMap r;
  VecMap d;
};

inline dshell::VecField sample_map(const ParamGrid& g, const VecMap& f)
{
  return dshell::VecField::generate(g, [&](int i, int j) { return f(g.theta1(i), g.theta2(j)); });
}

inline constexpr double kRollRadius = 0.8;

// Analytic directed deformations: three Kirchhoff-Love cases (d = n) and one with a tilted, stretched director.
inline std::vector<DeformationFixture> deformations(int n = 41)
{
  const double rho = kRollRadius;
  return {
      {"stretch", flat(n), [](double t1, double t2) { return Vec3(1.3 * t1, t2, 0.0); },
       [](double, double) { return Vec3(0, 0, 1); }},
      {"cylinder", flat(n),
       [rho](double t1, double t2) { return Vec3(rho * std::sin(t1 / rho), t2, rho * std::cos(t1 / rho) - rho); },
       [rho](double t1, double) { return Vec3(std::sin(t1 / rho), 0.0, std::cos(t1 / rho)); }},
      {"inflation", sphere(1.0, n),
       [](double t1, double t2) { return Vec3(1.3 * std::sin(t1) * std::cos(t2), 1.3 * std::sin(t1) * std::sin(t2), 1.3 * std::cos(t1)); },
       [](double t1, double t2) { return Vec3(std::sin(t1) * std::cos(t2), std::sin(t1) * std::sin(t2), std::cos(t1)); }},
      {"tilted", flat(n),
       [](double t1, double t2) { return Vec3(t1 + 0.1 * std::sin(t2), t2 + 0.05 * t1 * t1, 0.2 * t1 * t2); },
       [](double t1, double t2) { return Vec3(0.1 * t2, 0.05 + 0.1 * t1, 1.0 + 0.2 * t1 * t2); }},
  };
}

// Smooth incompatible strains. With zero_J the skew parts of Lambda_ab and Delta_{a|b} cancel
// exactly (Lambda symmetric, Delta_a a gradient of a bilinear function).
inline dshell::StrainSet manufactured_strains(const ParamGrid& g, double amp, double phase, bool zero_J)
{
  using namespace dshell;
  auto f = [&](int k, int i, int j) {
    return amp * std::sin(phase + k + (k % 3 + 1) * g.theta1(i) - (k % 2 + 1) * g.theta2(j));
  };
  StrainSet s = StrainSet::zero(g);
  s.E = Mat2Field::generate(g, [&](int i, int j) { return (Mat2() << f(0, i, j), f(1, i, j), f(1, i, j), f(2, i, j)).finished(); });
  s.Lam = Mat2Field::generate(g, [&](int i, int j) {
    return (Mat2() << f(3, i, j), f(4, i, j), zero_J ? f(4, i, j) : f(5, i, j), f(6, i, j)).finished();
  });
  s.lam = Vec2Field::generate(g, [&](int i, int j) { return Vec2(f(7, i, j), f(8, i, j)); });
  s.Del = Vec2Field::generate(g, [&](int i, int j) {
    return zero_J ? Vec2(0.5 * amp * g.theta2(j), 0.5 * amp * g.theta1(i)) : Vec2(f(9, i, j), f(10, i, j));
  });
  s.del = ScalarField::generate(g, [&](int i, int j) { return f(11, i, j); });
  return s;
}

template <class F>
double max_over(const ParamGrid& g, F&& f)
{
  double m = 0.0;
  for (int j = 0; j < g.n2(); ++j)
    for (int i = 0; i < g.n1(); ++i) m = std::max(m, std::abs(f(i, j)));
  return m;
}

} // namespace fixtures

#pragma once

/// \file surface.hpp
/// Reference-surface geometry: frames, fundamental forms, surface
/// Christoffel symbols and the single independent 2-d curvature component.
///
/// Sign convention: B_{ab} = -N_{,b} . A_a with N = A_1 x A_2 / |A_1 x A_2|.
/// Index 0 of every container stands for the 1-based index 1.

#include <functional>

#include "dshell/expr.hpp"
#include "dshell/field.hpp"

namespace dshell
{

/// Analytic parametrization R(t1, t2) of a surface over a grid.
struct SurfaceChart
{
  std::function<Vec3(double, double)> R;
  ParamGrid grid;

  static SurfaceChart from_exprs(const Expr& x, const Expr& y, const Expr& z, const ParamGrid& grid);
  VecField sample() const;
};

/// Minimum |A_1 x A_2| accepted at any node.
inline constexpr double regularity_floor = 1e-10;

struct SurfaceGeometry
{
  VecField R;
  VecField A1;
  VecField A2;
  VecField N;
  Mat2Field A;
  Mat2Field Ainv;
  Mat2Field B;
  Mat2Field C;

  const ParamGrid& grid() const { return R.grid(); }
  const VecField& tangent(int alpha) const { return alpha == 0 ? A1 : A2; }
  /// Mixed form B^a_b = A^{am} B_{mb}.
  Mat2Field B_mixed() const;
  /// Dual frame vectors A^a = A^{ab} A_b.
  VecField dual(int alpha) const;
};

/// Frames and fundamental forms of a sampled surface r(t1, t2), derivatives by
/// finite differences. B is symmetrized node-wise.
SurfaceGeometry surface_from_positions(const VecField& r);

SurfaceGeometry fundamental_forms(const SurfaceChart& chart);

/// X^T A^{-1} X per node, i.e. a^{sg} X_{sa} X_{gb}.
Mat2Field quadratic_contraction(const Mat2Field& ainv, const Mat2Field& x);

struct SurfaceChristoffels
{
  Tensor3Field2 lower; ///< s_{abm}, symmetric in (a, b)
  Tensor3Field2 upper; ///< s^s_{ab}, stored as (s, a, b)
};

SurfaceChristoffels surface_christoffels(const Mat2Field& a);

/// S_{1212} of the metric a.
ScalarField riemann2d(const Mat2Field& a);

/// v_{a|b} = v_{a,b} - s^s_{ab} v_s, stored as (a, b).
Mat2Field covariant_derivative(const Vec2Field& v, const SurfaceChristoffels& s);

/// t_{ab|g} = t_{ab,g} - s^s_{ag} t_{sb} - s^s_{bg} t_{as}, stored as (a, b, g).
Tensor3Field2 covariant_derivative(const Mat2Field& t, const SurfaceChristoffels& s);

/// Component slices.
ScalarField component(const Mat2Field& m, int r, int c);
ScalarField component(const Vec2Field& v, int k);

} // namespace dshell

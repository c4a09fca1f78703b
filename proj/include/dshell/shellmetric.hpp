#pragma once

/// \file shellmetric.hpp
/// The 3-d shell metric as exact quadratic polynomials in zeta:
///   g_ab = a_ab + zeta P_ab + zeta^2 Q_ab,  g_a3 = Del_a + zeta U_a,  g_33 = V.

#include "dshell/field.hpp"
#include "dshell/surface.hpp"

namespace dshell
{

/// Two-dimensional Cosserat strain measures.
struct StrainSet
{
  Mat2Field E;   ///< E_ab, symmetric
  Mat2Field Lam; ///< Lambda_ab
  Vec2Field lam; ///< Lambda_a
  Vec2Field Del; ///< Delta_a
  ScalarField del; ///< Delta

  static StrainSet zero(const ParamGrid& grid);
  const ParamGrid& grid() const { return E.grid(); }
};

/// Smallest |Delta + 1| accepted.
inline constexpr double director_floor = 1e-8;

/// Checks symmetry of E, positive definiteness of A + 2E and |Delta + 1|.
void validate_strains(const SurfaceGeometry& geo, const StrainSet& s);

struct ShellMetric
{
  Mat2Field a;
  Mat2Field P;
  Mat2Field Q;
  Vec2Field Del;
  Vec2Field U;
  ScalarField V;
  double h = 0.0; ///< half thickness; zeta ranges over [-h, h]

  const ParamGrid& grid() const { return a.grid(); }
  Mat3 at(std::size_t node, double zeta) const;
  Mat3 dzeta_at(std::size_t node, double zeta) const;
  /// Second zeta-derivative, independent of zeta.
  Mat3 dzeta2_at(std::size_t node) const;
};

/// Rejects metrics that are not positive definite at zeta in {-h, 0, h}.
void validate_metric(const ShellMetric& m);

ShellMetric build_metric(const SurfaceGeometry& geo, const StrainSet& s, double half_thickness);

/// Exact metric of the Euclidean neighbourhood R + zeta N.
ShellMetric ambient_metric(const SurfaceGeometry& geo, double half_thickness);

Mat3Field metric_eval(const ShellMetric& m, double zeta);
Mat3Field metric_dzeta(const ShellMetric& m, double zeta);

} // namespace dshell

#pragma once

/// \file defects.hpp
/// Material uniformity fields H_{lj} (g_j = H_{lj} G^l), the connection they
/// induce, Cosserat uniformity bases and the 2-d inhomogeneity measures.

#include <array>
#include <functional>

#include "dshell/expr.hpp"
#include "dshell/geometry.hpp"
#include "dshell/surface.hpp"

namespace dshell
{

/// Minimum det H accepted at any node.
inline constexpr double uniformity_det_floor = 1e-10;

struct UniformityField
{
  enum class Provenance
  {
    analytic,
    integrated
  };

  Mat3Field H;    ///< H_{lj}(theta, 0), stored (l, j)
  Mat3Field Hdz;  ///< zeta-derivative at zeta = 0
  Mat3Field Hdzz; ///< second zeta-derivative at zeta = 0
  Provenance provenance = Provenance::analytic;

  const ParamGrid& grid() const { return H.grid(); }
};

void validate_uniformity(const UniformityField& u);

/// Samples an analytic H(t1, t2, zeta); zeta-derivatives by fourth-order
/// differences of the analytic map unless dH is supplied.
UniformityField uniformity_from_function(const ParamGrid& grid, const std::function<Mat3(double, double, double)>& H,
                                         const std::function<Mat3(double, double, double)>& dH = {});

/// Nine row-major expressions H_11, H_12, ..., H_33, optionally nine for dH/dzeta.
UniformityField uniformity_from_exprs(const ParamGrid& grid, const std::array<Expr, 9>& H,
                                      const std::array<Expr, 9>* dH = nullptr);

/// L^q_{ij} = (H^{-1})^{ql} H_{li,j} at zeta = 0 and its zeta-derivative.
Connection3 uniformity_connection(const UniformityField& u);

/// Jet of g_{ij} = H_{li} H_{mj} G^{lm}(zeta) with G the ambient shell metric.
MetricJet pulled_back_jet(const UniformityField& u, const SurfaceGeometry& geo);

struct CosseratBases
{
  std::array<VecField, 2> a; ///< a_alpha
  std::array<VecField, 2> D; ///< D_alpha
  VecField d;
};

/// Minimum |a_1 x a_2| and |d . (a_1 x a_2)| accepted at any node.
inline constexpr double bases_floor = 1e-10;

CosseratBases cosserat_bases(const UniformityField& u, const SurfaceGeometry& geo);

/// Strain measures of the Cosserat material space.
StrainSet strains_from_bases(const CosseratBases& b, const SurfaceGeometry& geo);

/// Shell metric assembled from the bases' strains.
ShellMetric pulled_back_metric(const UniformityField& u, const SurfaceGeometry& geo, double half_thickness);

struct DefectSet
{
  Tensor3Field2 Tmab; ///< T_{mu alpha beta}, stored (mu, alpha, beta)
  Mat2Field T3ab;     ///< T_{3 alpha beta}
  Mat2Field Tma3;     ///< T_{mu alpha 3}, stored (mu, alpha)
  Vec2Field T3a3;     ///< T_{3 alpha 3}

  const ParamGrid& grid() const { return T3ab.grid(); }
  static DefectSet zero(const ParamGrid& grid);
  double max_norm() const;
};

/// Skew parts H_{i[alpha,j]} at zeta = 0 written through the surface fields
/// H_ab = A_a . a_b, H_3a = N . a_a, F_ab = A_a . D_b, F_3b = N . D_b,
/// F_a3 = A_a . d and F_33 = N . d.
DefectSet inhomogeneity_measures(const UniformityField& u, const SurfaceGeometry& geo);

/// T^p_{ij}(theta, 0) = (H^{-1})^{pl} T_{lij}; T^p_{33} = 0. Tdz is left zero.
TorsionSet torsion_restriction(const DefectSet& d, const UniformityField& u);

struct IntegrationOptions
{
  int seed_i = 0;
  int seed_j = 0;
  bool theta1_first = true;
  /// Largest accepted |R| of the input connection; negative selects
  /// 1e-6 + integrability_c * max(h1, h2)^2.
  double curvature_tol = -1.0;
  double integrability_c = 50.0;
};

/// Solves H_{lj,i} = L^p_{ji} H_{lp} by RK4 along grid lines from the seed.
UniformityField integrate_uniformity(const Connection3& c, const Mat3& H0, const IntegrationOptions& opt = {});

/// max |H_{lj,i} - L^p_{ji} H_{lp}| over nodes and in-plane i.
double uniformity_pde_residual(const UniformityField& u, const Connection3& c);

} // namespace dshell

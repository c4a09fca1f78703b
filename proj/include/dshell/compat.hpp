#pragma once

/// \file compat.hpp
/// Strain measures of a directed surface, the four compatibility conditions,
/// their curvature and torsion expressions, and reconstruction of (r, d)
/// from compatible strains.

#include <string>

#include "dshell/defects.hpp"
#include "dshell/geometry.hpp"
#include "dshell/shellmetric.hpp"
#include "dshell/surface.hpp"

namespace dshell
{

/// Deformed mid-surface r and director d; d = d_a a^a + d n with d_a = d . a_a.
struct DirectedDeformation
{
  VecField r;
  VecField d;

  const ParamGrid& grid() const { return r.grid(); }
  static DirectedDeformation from_exprs(const std::array<Expr, 3>& r, const std::array<Expr, 3>& d, const ParamGrid& grid);
};

/// Strains E, Delta_a, Delta, Lambda_ab, Lambda_a of a deformation of the reference surface.
StrainSet strain_measures(const SurfaceGeometry& geo, const DirectedDeformation& def);

/// Same strains written through the deformed surface: Lambda_ab = B_ab + d_{a|b} - d b_ab and
/// Lambda_a = d_{,a} + d_s b^s_a with the deformed metric and second form.
StrainSet strain_measures_intrinsic(const SurfaceGeometry& geo, const DirectedDeformation& def);

/// b_ab = -(Lambda_ab - B_ab - Delta_{a|b}) / (Delta + 1), not symmetrized.
Mat2Field second_form_from_strains(const SurfaceGeometry& geo, const StrainSet& s);

struct IncompatibilitySet
{
  ScalarField J;
  ScalarField K;
  Vec2Field L;
  Vec2Field I;

  const ParamGrid& grid() const { return J.grid(); }
  static IncompatibilitySet zero(const ParamGrid& grid);
  double max_norm() const;
};

/// Left-hand sides of the strain compatibility conditions.
IncompatibilitySet compatibility_residuals(const SurfaceGeometry& geo, const StrainSet& s);

/// Spelling of the K_{r3s3} relation: the proof's form (1/2 e_{b(r} I_{s)} J and b_{bs}(Lambda_ar - B_ar))
/// or the remark's form (e_{[b(r]} I_{s)} J and e_{bs}(Lambda_ar - B_ar)).
enum class IVariant
{
  rel3,
  remark
};

IVariant parse_variant(const std::string& name);
std::string to_string(IVariant v);

/// Left-hand side of the K_{r3s3} relation for given (J, I), stored (r, s).
Mat2Field kr3s3_lhs(const SurfaceGeometry& geo, const StrainSet& s, const ScalarField& J, const Vec2Field& I, IVariant v);

struct CurvatureIncompatibility
{
  IncompatibilitySet set; ///< K and L from the relations; J and I as selected
  Mat2Field triple;       ///< K_{r3s3} minus the relation's left-hand side at (J, I)
};

/// Inverts the K_1212 and K_12s3 relations for K and L. With candidate == nullptr
/// the zero branch J = 0, I = 0 is selected; otherwise the candidate's (J, I) are used.
CurvatureIncompatibility incompatibility_from_curvature(const Curvature3& kc, const SurfaceGeometry& geo, const StrainSet& s,
                                                        IVariant v, const IncompatibilitySet* candidate = nullptr);

/// Curvature of build_metric(geo, s) restricted to zeta = 0.
Curvature3 shell_curvature(const SurfaceGeometry& geo, const StrainSet& s, double half_thickness);

/// Contortion-based right-hand sides -g_{pi}[C^p_{jl|k} - C^p_{jk|l} + ...] at the six slots.
Curvature3 torsion_curvature_rhs(const MetricJet& jet, const TorsionSet& t);

/// Right-hand sides from torsion mapped through the same relations as the curvature.
CurvatureIncompatibility incompatibility_rhs_from_torsion(const SurfaceGeometry& geo, const StrainSet& s, const TorsionSet& t,
                                                          IVariant v, double half_thickness,
                                                          const IncompatibilitySet* candidate = nullptr);

struct ReconstructionOptions
{
  int seed_i = 0;
  int seed_j = 0;
  /// Largest accepted compatibility residual; negative selects 1e-6 + residual_c * max(h1, h2)^2.
  double residual_tol = -1.0;
  double residual_c = 50.0;
  /// Largest accepted frame defect |a_a . a_b - a_ab|, |n . a_a|, ||n| - 1|; negative selects the same rule.
  double drift_tol = -1.0;
};

/// Integrates the Gauss-Weingarten system with metric a = A + 2E and symmetric second form b
/// from the reference frame at the seed node, then sets d = Delta_s a^s + (Delta + 1) n.
DirectedDeformation reconstruct_surface(const SurfaceGeometry& geo, const StrainSet& s, const ReconstructionOptions& opt = {});

/// Root-mean-square distance between point sets after the optimal rigid motion.
double rigid_fit_rms(const VecField& p, const VecField& q);
/// Largest pointwise distance after the rigid motion that minimises the RMS distance.
double rigid_fit_max(const VecField& p, const VecField& q);

} // namespace dshell

#pragma once

/// \file klsolver.hpp
/// Kirchhoff-Love specialization: reduced incompatibility relations,
/// isotropic energies, stress and moment, equilibrium residuals and
/// residual-stress solves on flat plates.

#include <array>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "dshell/compat.hpp"
#include "dshell/defects.hpp"
#include "dshell/geometry.hpp"

namespace dshell
{

/// Isotropic material. h is the full shell thickness.
struct Material
{
  double E_young = 1.0;
  double nu = 0.3;
  double h = 0.1;

  /// Requires E_young > 0, 0 < nu < 0.5, h > 0.
  void validate() const;
};

struct KLState
{
  Mat2Field E;
  Mat2Field Lam;   ///< symmetric
  Mat2Field sigma; ///< sigma^{ab}
  Mat2Field M;     ///< M^{ab}
  Material material;
  ScalarField skew; ///< |Lambda_[12]| dropped by kl_reduce
  std::vector<std::string> warnings;

  const ParamGrid& grid() const { return E.grid(); }
  static KLState zero(const ParamGrid& grid, const Material& m = {});
};

/// Largest dropped |Lambda_[12]| that kl_reduce accepts without a warning.
inline constexpr double kl_skew_tolerance = 1e-10;

/// Imposes d = n: drops Delta_a, Delta, Lambda_a and the antisymmetric part of Lambda.
KLState kl_reduce(const StrainSet& s, const Material& m = {});

/// Strain set of a KL state (zero director strains).
StrainSet kl_strains(const KLState& k);

/// Gauss and Codazzi-Mainardi parts of the reduced relations.
struct KLRelations
{
  ScalarField K; ///< S_1212 - b_11 b_22 + b_12^2, or its right-hand side
  Vec2Field L;   ///< b_{s1|2} - b_{s2|1}, or its right-hand side

  const ParamGrid& grid() const { return K.grid(); }
  double max_norm() const;
};

/// Right-hand sides from the in-surface dislocation density T^r_ab(theta, 0):
/// K = -a_r1 [C^r_22|1 - C^r_21|2 + C^m_22 C^r_m1 - C^m_21 C^r_m2] and
/// L_s = a_r1 C^r_2s|3, with C^r_ab = T^r_ab - g^{mr} g_an T^n_mb - g^{mr} g_bn T^n_ma,
/// C^3_ab = T^3_ab and g_ab = a_ab - 2 zeta b_ab. Surface indices use the surface
/// connection of a; T^3_ab never enters.
KLRelations kl_torsion_rhs(const SurfaceGeometry& geo, const KLState& k, const TorsionSet& t);

/// Left-hand side minus right-hand side of the reduced relations.
KLRelations kl_incompatibility_residual(const SurfaceGeometry& geo, const KLState& k, const IncompatibilitySet& source);
KLRelations kl_incompatibility_residual(const SurfaceGeometry& geo, const KLState& k, const TorsionSet& source);

/// Three-dimensional energy density W at (node, zeta) given the shell metric g and the
/// reference metric G there.
using EnergyDensity = std::function<double(std::size_t node, double zeta, const Mat3& g, const Mat3& G)>;

/// psi = (1/sqrt A) int_{-h}^{h} sqrt(G) W dzeta by Gauss-Legendre quadrature of the given order.
ScalarField thickness_integrate_energy(const EnergyDensity& W, const SurfaceGeometry& geo, const StrainSet& s,
                                       double half_thickness, int order);

/// Quadratic isotropic energy
/// psi = Eh/(2(1-nu^2)) (nu J1^2 + (1-nu) J2) + Eh^3/(24(1-nu^2)) (nu J3 + (1-nu) J4).
double kl_energy_density(const Mat2& E, const Mat2& Lam, const Mat2& A, const Material& m);

/// The seven invariants J1..J7 at one node; e^{ab} is the permutation symbol.
std::array<double, 7> kl_invariants(const Mat2& E, const Mat2& Lam, const Mat2& A);

struct StressMoment
{
  Mat2 sigma; ///< j sigma^{ba} = 1/2 (dpsi/dE_ab + dpsi/dE_ba)
  Mat2 M;     ///< j M^{ba} = -1/2 (dpsi/dLambda_ab + dpsi/dLambda_ba)
};

StressMoment kl_stress_moment(const Mat2& E, const Mat2& Lam, const Mat2& A, const Material& m);

struct KLEnergy
{
  ScalarField psi;
  std::array<ScalarField, 7> J;
};

KLEnergy isotropic_kl_energy(const KLState& k, const SurfaceGeometry& geo);

struct StressMomentFields
{
  Mat2Field sigma;
  Mat2Field M;
};

StressMomentFields stress_and_moment(const KLState& k, const SurfaceGeometry& geo);

/// Copy of k with sigma and M filled from the quadratic energy.
KLState with_stress(const KLState& k, const SurfaceGeometry& geo);

enum class Derivatives
{
  covariant, ///< surface connection of the deformed metric a = A + 2E
  partial    ///< plain partial derivatives (Cartesian plate)
};

struct EquilibriumResidual
{
  Vec2Field force;    ///< (sigma^{ma} + M^{ba} b^m_b)_{|a} + M^{ba}_{|b} b^m_a
  ScalarField normal; ///< (sigma^{ba} + M^{ma} b^b_m) b_ba - M^{ba}_{|ba}

  double max_norm() const;
};

EquilibriumResidual equilibrium_residual(const KLState& k, const SurfaceGeometry& geo, const Mat2Field& b,
                                         Derivatives d = Derivatives::covariant);

struct CosseratEquilibrium
{
  VecField force;  ///< T^a_{;a}
  VecField moment; ///< M^a_{;a} - k
  VecField couple; ///< a_a x T^a + D_a x M^a + d x k

  double max_norm() const;
};

/// Divergences are (1/sqrt a)(sqrt a X^a)_{,a} with a = det(a_a . a_b).
CosseratEquilibrium cosserat_equilibrium_residual(const CosseratBases& bases, const std::array<VecField, 2>& T,
                                                  const std::array<VecField, 2>& M, const VecField& k);

enum class PlateMode
{
  pure_bending,
  small_strain
};

PlateMode parse_plate_mode(const std::string& name);
std::string to_string(PlateMode m);

/// Right-hand sides of a plate solve. f and f3 are body loads added to the force and
/// normal equilibrium equations; they are zero for physical runs and carry the
/// manufactured terms otherwise.
struct PlateSource
{
  ScalarField K;  ///< K_1212(theta, 0)
  Vec2Field L;    ///< K_12s3(theta, 0)
  Vec2Field f;
  ScalarField f3;

  const ParamGrid& grid() const { return K.grid(); }
  static PlateSource zero(const ParamGrid& grid);
};

/// Largest |J| or |I_a| accepted from an incompatibility source.
inline constexpr double kl_source_tolerance = 1e-10;

/// K and L_s of an incompatibility set; rejects J != 0 and I_a != 0.
PlateSource plate_source(const IncompatibilitySet& s);

enum class PlateBoundary
{
  dirichlet,    ///< prescribed E and Lambda on boundary nodes
  traction_free ///< sigma n = 0 and M n = 0 on boundary nodes, equations everywhere
};

struct PlateBC
{
  PlateBoundary kind = PlateBoundary::dirichlet;
  Mat2Field E;   ///< boundary values; interior entries ignored
  Mat2Field Lam;

  static PlateBC clamped(const ParamGrid& grid);
};

struct PlateOptions
{
  int max_iterations = 30;
  double gradient_tol = 1e-8; ///< scaled normal-equation gradient, max-norm, relative to its initial value
  double step_tol = 1e-13;    ///< relative step size
  double plateau_rtol = 1e-13; ///< relative cost decrease treated as stagnation
  int max_outer = 20;          ///< source updates for torsion-sourced solves
  double outer_tol = 1e-10;
  bool throw_on_failure = true;
};

struct IterationRecord
{
  int iteration;
  double residual; ///< scaled residual 2-norm after the step
  double step;     ///< 2-norm of the accepted step
  double damping;  ///< Levenberg-Marquardt parameter used
};

struct PlateSolution
{
  KLState state;   ///< for pure bending sigma holds the multiplier field
  std::vector<IterationRecord> log{};
  bool converged = false;
  std::string stop_reason{}; ///< gradient, plateau, step, no descent step, stationary initial state, iteration limit
  double residual_max = 0.0; ///< unscaled max-norm of the final equation residual
  double multiplier_residual = 0.0; ///< pure bending: max-norm of the equilibrium residual after recovery
  int outer_iterations = 0;
};

/// Solves the reduced incompatibility and equilibrium equations on a flat Cartesian
/// plate by Levenberg-Marquardt on the stacked finite-difference residual.
PlateSolution solve_plate(const SurfaceGeometry& geo, PlateMode mode, const PlateSource& source, const PlateBC& bc,
                          const Material& m, const PlateOptions& opt = {});
PlateSolution solve_plate(const SurfaceGeometry& geo, PlateMode mode, const IncompatibilitySet& source, const PlateBC& bc,
                          const Material& m, const PlateOptions& opt = {});
/// The source depends on the state through a and b, so it is updated between solves.
PlateSolution solve_plate(const SurfaceGeometry& geo, PlateMode mode, const TorsionSet& source, const PlateBC& bc,
                          const Material& m, const PlateOptions& opt = {});

using Mat2Function = std::function<Mat2(double, double)>;

struct ManufacturedPlate
{
  PlateSource source;
  PlateBC bc;
  Mat2Field E;
  Mat2Field Lam;
};

/// Sources and Dirichlet data for which (E*, Lambda*) solves the continuous plate
/// equations; derivatives by fourth-order differences with step 1e-3.
ManufacturedPlate manufacture_plate(const ParamGrid& grid, PlateMode mode, const Mat2Function& E, const Mat2Function& Lam,
                                    const Material& m);

/// CSV with columns iteration, residual, step, damping.
void write_iteration_log(std::ostream& os, const std::vector<IterationRecord>& log);

} // namespace dshell

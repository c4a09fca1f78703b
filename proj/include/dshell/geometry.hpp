#pragma once

/// \file geometry.hpp
/// Connections on the shell body restricted to the mid-surface: Levi-Civita
/// coefficients, curvature, torsion, contortion and non-metricity.
///
/// Roman indices run over 0, 1, 2 with 2 standing for zeta. A connection
/// L^p_{ij} is stored as (p, i, j); for the material connection the last
/// index is the differentiation index.

#include <array>

#include "dshell/field.hpp"
#include "dshell/shellmetric.hpp"

namespace dshell
{

/// Connection coefficients at zeta = 0 and their exact zeta-derivative.
struct Connection3
{
  Tensor3Field L;
  Tensor3Field Ldz;

  const ParamGrid& grid() const { return L.grid(); }
};

/// The six independent lowered curvature components at zeta = 0.
struct Curvature3
{
  /// (i, j, k, l) index quadruples, zero-based: 1212, 1213, 1223, 1313, 1323, 2323.
  static constexpr std::array<std::array<int, 4>, 6> slots{
      {{0, 1, 0, 1}, {0, 1, 0, 2}, {0, 1, 1, 2}, {0, 2, 0, 2}, {0, 2, 1, 2}, {1, 2, 1, 2}}};

  std::array<ScalarField, 6> K;

  const ScalarField& K1212() const { return K[0]; }
  const ScalarField& K1213() const { return K[1]; }
  const ScalarField& K1223() const { return K[2]; }
  const ScalarField& K1313() const { return K[3]; }
  const ScalarField& K1323() const { return K[4]; }
  const ScalarField& K2323() const { return K[5]; }

  /// K_{12s3} for s in {0, 1}.
  const ScalarField& K12s3(int s) const { return K[1 + s]; }
  /// K_{r3s3}, symmetric in (r, s).
  const ScalarField& Kr3s3(int r, int s) const { return r + s == 0 ? K[3] : r + s == 1 ? K[4] : K[5]; }

  /// Full lowered tensor rebuilt by the Riemann symmetries.
  Tensor4Field full() const;
  double max_norm() const;
};

struct TorsionSet
{
  Tensor3Field T;   ///< T^p_{ij} at zeta = 0, antisymmetric in (i, j)
  Tensor3Field Tdz; ///< zeta-derivative at zeta = 0 (zero when unknown)
  Mat3Field axial;  ///< alpha^{kp} = 1/2 eps^{ijk} T^p_{ij}, stored (k, p)

  const ParamGrid& grid() const { return T.grid(); }
};

/// Metric data at zeta = 0: g, its inverse, its derivatives along
/// theta^1, theta^2, zeta, and the zeta-derivatives of those.
struct MetricJet
{
  Mat3Field g;
  Mat3Field ginv;
  std::array<Mat3Field, 3> dg;   ///< g_{ij,k}
  std::array<Mat3Field, 3> dgdz; ///< (g_{ij,k}),zeta
  Mat3Field gdz;                 ///< g_{ij,3}
};

MetricJet metric_jet(const ShellMetric& m);

/// Levi-Civita connection at zeta = 0.
Connection3 levi_civita(const MetricJet& jet);
Connection3 levi_civita(const ShellMetric& m);

/// Lowered Christoffel symbols Gamma_{ijp} = 1/2(g_{ip,j} + g_{jp,i} - g_{ij,p}) at zeta = 0.
Tensor3Field christoffel_lower(const MetricJet& jet);

/// R^i_{jkl} = L^i_{jl,k} - L^i_{jk,l} + L^h_{jl} L^i_{hk} - L^h_{jk} L^i_{hl} at zeta = 0, stored (i, j, k, l).
Tensor4Field material_curvature(const Connection3& c);

/// Lowered curvature K_{ijkl} = g_{im} K^m_{jkl} of a connection at zeta = 0.
Curvature3 riemann_at_midsurface(const Connection3& c, const Mat3Field& g);
Curvature3 riemann_at_midsurface(const Connection3& c, const ShellMetric& m);

TorsionSet torsion(const Connection3& c);

/// Rebuilds T^p_{ij} = eps_{ijk} alpha^{kp}.
Tensor3Field torsion_from_axial(const Mat3Field& axial);

/// Contortion C^p_{ij} at the given zeta, with T(zeta) = T + zeta Tdz.
Tensor3Field contortion(const TorsionSet& t, const ShellMetric& m, double zeta);

Tensor3Field contortion(const TorsionSet& t, const MetricJet& jet);

/// Exact zeta-derivative of the contortion at zeta = 0.
Tensor3Field contortion_dzeta(const TorsionSet& t, const MetricJet& jet);
Tensor3Field contortion_dzeta(const TorsionSet& t, const ShellMetric& m);

/// g_{ij,k} - L^p_{ik} g_{pj} - L^p_{jk} g_{pi} at zeta = 0, stored (i, j, k).
Tensor3Field nonmetricity(const MetricJet& jet, const Connection3& c);
Tensor3Field nonmetricity(const ShellMetric& m, const Connection3& c);

/// C^i_{jl|k} with respect to the Levi-Civita connection, stored (i, j, l, k).
Tensor4Field covariant_derivative_contortion(const Tensor3Field& C, const Tensor3Field& Cdz, const Connection3& lc);

/// Xi^i_{jkl} = C^i_{jl|k} - C^i_{jk|l} + C^h_{jl} C^i_{hk} - C^h_{jk} C^i_{hl}.
Tensor4Field contortion_curvature(const TorsionSet& t, const MetricJet& jet);

/// K^i_{jkl} + Xi^i_{jkl}; vanishes when the material connection is flat.
Tensor4Field curvature_decomposition_residual(const MetricJet& jet, const TorsionSet& t);
Tensor4Field curvature_decomposition_residual(const ShellMetric& m, const TorsionSet& t);

/// Lowers the first index with g.
Tensor4Field lower_first(const Tensor4Field& r, const Mat3Field& g);

} // namespace dshell

#include "dshell/klsolver.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include <Eigen/CholmodSupport>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <gsl/gsl_integration.h>
#include <unsupported/Eigen/AutoDiff>

#include "dshell/io.hpp"

namespace dshell
{

void Material::validate() const
{
  if (!(E_young > 0.0) || !std::isfinite(E_young)) throw Error("material: E_young must be positive");
  if (!(nu > 0.0 && nu < 0.5)) throw Error("material: nu must lie in (0, 0.5)");
  if (!(h > 0.0) || !std::isfinite(h)) throw Error("material: thickness h must be positive");
}

KLState KLState::zero(const ParamGrid& grid, const Material& m)
{
  const Mat2Field z = Mat2Field::zero(grid);
  return {z, z, z, z, m, ScalarField::zero(grid), {}};
}

KLState kl_reduce(const StrainSet& s, const Material& m)
{
  m.validate();
  const ParamGrid& g = s.grid();
  KLState k = KLState::zero(g, m);
  k.E = s.E;
  k.Lam = symmetric_part(s.Lam);
  k.skew = s.Lam.map([](const Mat2& x) { return 0.5 * std::abs(x(0, 1) - x(1, 0)); });
  const double skew = k.skew.max_norm();
  if (skew > kl_skew_tolerance)
  {
    std::ostringstream os;
    os << "antisymmetric bending strain dropped, max |Lambda_[12]| = " << skew
       << "; a Kirchhoff-Love shell requires J = 0";
    k.warnings.push_back(os.str());
  }
  const double director = std::max({s.Del.max_norm(), s.del.max_norm(), s.lam.max_norm()});
  if (director > kl_skew_tolerance)
  {
    std::ostringstream os;
    os << "director strains dropped, max |Delta_a|, |Delta|, |Lambda_a| = " << director;
    k.warnings.push_back(os.str());
  }
  return k;
}

StrainSet kl_strains(const KLState& k)
{
  StrainSet s = StrainSet::zero(k.grid());
  s.E = k.E;
  s.Lam = k.Lam;
  return s;
}

double KLRelations::max_norm() const { return std::max(K.max_norm(), L.max_norm()); }

namespace
{

Mat2Field deformed(const SurfaceGeometry& geo, const Mat2Field& E)
{
  return zip([](const Mat2& A, const Mat2& e) -> Mat2 { return A + 2.0 * e; }, geo.A, E);
}

void require_same_grid(const ParamGrid& a, const ParamGrid& b, const char* what)
{
  if (!(a == b)) throw Error(std::string(what) + ": fields live on different grids");
}

} // namespace

KLRelations kl_torsion_rhs(const SurfaceGeometry& geo, const KLState& k, const TorsionSet& t)
{
  const ParamGrid& g = geo.grid();
  require_same_grid(g, t.grid(), "kl_torsion_rhs");
  const Mat2Field a = deformed(geo, k.E);
  const Mat2Field ainv = invert2(a);
  const SurfaceChristoffels sc = surface_christoffels(a);
  const Mat2Field b = zip([](const Mat2& B, const Mat2& L) -> Mat2 {
    const Mat2 x = B - L;
    return 0.5 * (x + x.transpose());
  }, geo.B, k.Lam);

  // contortion at zeta = 0 and its zeta-derivative, surface indices only
  std::vector<Tensor3<2>> cv(g.node_count()), dcv(g.node_count());
  detail::parallel_for(g.node_count(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t n = lo; n < hi; ++n)
    {
      const Tensor3<3>& T = t.T[n];
      const Mat2& am = a[n];
      const Mat2& ai = ainv[n];
      const Mat2 gl = -2.0 * b[n];
      const Mat2 gu = 2.0 * ai * b[n] * ai;
      Tensor3<2> c, dc;
      for (int r = 0; r < 2; ++r)
        for (int al = 0; al < 2; ++al)
          for (int be = 0; be < 2; ++be)
          {
            double v = T(r, al, be);
            double dv = 0.0;
            for (int m = 0; m < 2; ++m)
              for (int nn = 0; nn < 2; ++nn)
              {
                v -= ai(m, r) * am(al, nn) * T(nn, m, be) + ai(m, r) * am(be, nn) * T(nn, m, al);
                dv -= (gu(m, r) * am(al, nn) + ai(m, r) * gl(al, nn)) * T(nn, m, be) +
                      (gu(m, r) * am(be, nn) + ai(m, r) * gl(be, nn)) * T(nn, m, al);
              }
            c(r, al, be) = v;
            dc(r, al, be) = dv;
          }
      cv[n] = c;
      dcv[n] = dc;
    }
  });
  const Tensor3Field2 C(g, std::move(cv));
  const Tensor3Field2 dC(g, std::move(dcv));
  const Tensor3Field2 dCd[2] = {partial(C, 1), partial(C, 2)};

  std::vector<double> Kv(g.node_count());
  std::vector<Vec2> Lv(g.node_count());
  detail::parallel_for(g.node_count(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t n = lo; n < hi; ++n)
    {
      const Tensor3<2>& c = C[n];
      const Tensor3<2>& s = sc.upper[n];
      // C^r_ab|g with the surface connection of a
      auto cov = [&](int r, int al, int be, int ga) {
        double v = dCd[ga][n](r, al, be);
        for (int m = 0; m < 2; ++m) v += s(r, ga, m) * c(m, al, be) - s(m, ga, al) * c(r, m, be) - s(m, ga, be) * c(r, al, m);
        return v;
      };
      double K = 0.0;
      for (int r = 0; r < 2; ++r)
      {
        double bracket = cov(r, 1, 1, 0) - cov(r, 1, 0, 1);
        for (int m = 0; m < 2; ++m) bracket += c(m, 1, 1) * c(r, m, 0) - c(m, 1, 0) * c(r, m, 1);
        K -= a[n](r, 0) * bracket;
      }
      // Gamma^r_{3m} = -b^r_m, Gamma^r_33 = Gamma^3_3a = 0
      const Mat2 G3 = -(ainv[n] * b[n]);
      Vec2 L = Vec2::Zero();
      for (int sg = 0; sg < 2; ++sg)
        for (int r = 0; r < 2; ++r)
        {
          double v = dC[n](r, 1, sg);
          for (int m = 0; m < 2; ++m) v += G3(r, m) * c(m, 1, sg) - G3(m, 1) * c(r, m, sg) - G3(m, sg) * c(r, 1, m);
          L(sg) += a[n](r, 0) * v;
        }
      Kv[n] = K;
      Lv[n] = L;
    }
  });
  return {ScalarField(g, std::move(Kv)), Vec2Field(g, std::move(Lv))};
}

namespace
{

KLRelations kl_lhs(const SurfaceGeometry& geo, const KLState& k)
{
  const IncompatibilitySet r = compatibility_residuals(geo, kl_strains(k));
  return {r.K, r.L};
}

KLRelations difference(const KLRelations& x, const KLRelations& y)
{
  return {zip([](double p, double q) { return p - q; }, x.K, y.K),
          zip([](const Vec2& p, const Vec2& q) -> Vec2 { return p - q; }, x.L, y.L)};
}

} // namespace

KLRelations kl_incompatibility_residual(const SurfaceGeometry& geo, const KLState& k, const IncompatibilitySet& source)
{
  require_same_grid(geo.grid(), source.grid(), "kl_incompatibility_residual");
  return difference(kl_lhs(geo, k), {source.K, source.L});
}

KLRelations kl_incompatibility_residual(const SurfaceGeometry& geo, const KLState& k, const TorsionSet& source)
{
  return difference(kl_lhs(geo, k), kl_torsion_rhs(geo, k, source));
}

ScalarField thickness_integrate_energy(const EnergyDensity& W, const SurfaceGeometry& geo, const StrainSet& s,
                                       double half_thickness, int order)
{
  if (order < 2) throw Error("thickness_integrate_energy: quadrature order must be at least 2, got " + std::to_string(order));
  if (!(half_thickness > 0.0)) throw Error("thickness_integrate_energy: half thickness must be positive");
  const ShellMetric gm = build_metric(geo, s, half_thickness);
  const ShellMetric Gm = ambient_metric(geo, half_thickness);
  std::unique_ptr<gsl_integration_glfixed_table, decltype(&gsl_integration_glfixed_table_free)> table(
      gsl_integration_glfixed_table_alloc(static_cast<std::size_t>(order)), &gsl_integration_glfixed_table_free);
  if (!table) throw Error("thickness_integrate_energy: quadrature table allocation failed");
  std::vector<double> z(order), w(order);
  for (int q = 0; q < order; ++q)
    gsl_integration_glfixed_point(-half_thickness, half_thickness, static_cast<std::size_t>(q), &z[q], &w[q], table.get());
  const ParamGrid& g = geo.grid();
  std::vector<double> out(g.node_count());
  for (std::size_t n = 0; n < g.node_count(); ++n)
  {
    double acc = 0.0;
    for (int q = 0; q < order; ++q)
    {
      const Mat3 G = Gm.at(n, z[q]);
      acc += w[q] * std::sqrt(G.determinant()) * W(n, z[q], gm.at(n, z[q]), G);
    }
    out[n] = acc / std::sqrt(geo.A[n].determinant());
  }
  ScalarField psi(g, std::move(out));
  require_finite(psi, "thickness_integrate_energy");
  return psi;
}

namespace
{

struct Moduli
{
  double membrane; ///< Eh / (1 - nu^2)
  double bending;  ///< Eh^3 / (12 (1 - nu^2))
  double nu;
};

Moduli moduli(const Material& m)
{
  const double d = 1.0 - m.nu * m.nu;
  return {m.E_young * m.h / d, m.E_young * m.h * m.h * m.h / (12.0 * d), m.nu};
}

double contract(const Mat2& x, const Mat2& y) { return x.cwiseProduct(y).sum(); }

} // namespace

std::array<double, 7> kl_invariants(const Mat2& E, const Mat2& Lam, const Mat2& A)
{
  const Mat2 Ai = A.inverse();
  const Mat2 ELift = Ai * E * Ai;
  const Mat2 LLift = Ai * Lam * Ai;
  const double trL = contract(Lam, Ai);
  const double EL = contract(E, LLift);
  const Mat2 X = Lam * Ai * E.transpose();
  const double eX = X(0, 1) - X(1, 0);
  return {contract(E, Ai), contract(E, ELift), trL * trL, contract(Lam, LLift), EL * EL, eX * eX / A.determinant(), trL * EL};
}

double kl_energy_density(const Mat2& E, const Mat2& Lam, const Mat2& A, const Material& m)
{
  const auto J = kl_invariants(E, Lam, A);
  const Moduli c = moduli(m);
  return 0.5 * c.membrane * (c.nu * J[0] * J[0] + (1.0 - c.nu) * J[1]) + 0.5 * c.bending * (c.nu * J[2] + (1.0 - c.nu) * J[3]);
}

StressMoment kl_stress_moment(const Mat2& E, const Mat2& Lam, const Mat2& A, const Material& m)
{
  const Mat2 Ai = A.inverse();
  const Moduli c = moduli(m);
  const double j = std::sqrt((A + 2.0 * E).determinant() / A.determinant());
  const Mat2 ES = 0.5 * (E + E.transpose());
  const Mat2 LS = 0.5 * (Lam + Lam.transpose());
  const Mat2 sigma = c.membrane * (c.nu * contract(E, Ai) * Ai + (1.0 - c.nu) * Ai * ES * Ai) / j;
  const Mat2 M = -c.bending * (c.nu * contract(Lam, Ai) * Ai + (1.0 - c.nu) * Ai * LS * Ai) / j;
  return {sigma, M};
}

KLEnergy isotropic_kl_energy(const KLState& k, const SurfaceGeometry& geo)
{
  k.material.validate();
  const ParamGrid& g = geo.grid();
  require_same_grid(g, k.grid(), "isotropic_kl_energy");
  std::vector<double> psi(g.node_count());
  std::array<std::vector<double>, 7> inv;
  for (auto& v : inv) v.resize(g.node_count());
  for (std::size_t n = 0; n < g.node_count(); ++n)
  {
    const auto J = kl_invariants(k.E[n], k.Lam[n], geo.A[n]);
    for (int i = 0; i < 7; ++i) inv[i][n] = J[i];
    psi[n] = kl_energy_density(k.E[n], k.Lam[n], geo.A[n], k.material);
  }
  auto field = [&](int i) { return ScalarField(g, std::move(inv[i])); };
  return {ScalarField(g, std::move(psi)), {field(0), field(1), field(2), field(3), field(4), field(5), field(6)}};
}

StressMomentFields stress_and_moment(const KLState& k, const SurfaceGeometry& geo)
{
  k.material.validate();
  require_same_grid(geo.grid(), k.grid(), "stress_and_moment");
  const ParamGrid& g = geo.grid();
  std::vector<Mat2> sigma(g.node_count()), M(g.node_count());
  for (std::size_t n = 0; n < g.node_count(); ++n)
  {
    const StressMoment sm = kl_stress_moment(k.E[n], k.Lam[n], geo.A[n], k.material);
    sigma[n] = sm.sigma;
    M[n] = sm.M;
  }
  return {Mat2Field(g, std::move(sigma)), Mat2Field(g, std::move(M))};
}

KLState with_stress(const KLState& k, const SurfaceGeometry& geo)
{
  KLState out = k;
  StressMomentFields sm = stress_and_moment(k, geo);
  out.sigma = std::move(sm.sigma);
  out.M = std::move(sm.M);
  return out;
}

double EquilibriumResidual::max_norm() const { return std::max(force.max_norm(), normal.max_norm()); }

EquilibriumResidual equilibrium_residual(const KLState& k, const SurfaceGeometry& geo, const Mat2Field& b, Derivatives d)
{
  const ParamGrid& g = geo.grid();
  require_same_grid(g, k.grid(), "equilibrium_residual");
  require_same_grid(g, b.grid(), "equilibrium_residual");
  const Mat2Field a = deformed(geo, k.E);
  const Mat2Field ainv = invert2(a);
  const Tensor3Field2 s =
      d == Derivatives::covariant ? surface_christoffels(a).upper : Tensor3Field2::zero(g);
  const Mat2Field bm = zip([](const Mat2& ai, const Mat2& x) -> Mat2 { return ai * x; }, ainv, b);
  // N^{ma} = sigma^{ma} + M^{ba} b^m_b
  const Mat2Field N = zip([](const Mat2& sg, const Mat2& M, const Mat2& bx) -> Mat2 { return sg + bx * M; }, k.sigma, k.M, bm);
  const Mat2Field dN[2] = {partial(N, 1), partial(N, 2)};
  const Mat2Field dM[2] = {partial(k.M, 1), partial(k.M, 2)};
  // V^a = M^{ba}_{|b}
  const Vec2Field V = Vec2Field::generate(g, [&](int i, int j) {
    const Tensor3<2>& c = s(i, j);
    const Mat2& M = k.M(i, j);
    Vec2 v;
    for (int al = 0; al < 2; ++al)
    {
      double x = dM[0](i, j)(0, al) + dM[1](i, j)(1, al);
      for (int be = 0; be < 2; ++be)
        for (int ga = 0; ga < 2; ++ga) x += c(be, be, ga) * M(ga, al) + c(al, be, ga) * M(be, ga);
      v(al) = x;
    }
    return v;
  });
  const Vec2Field dV[2] = {partial(V, 1), partial(V, 2)};
  std::vector<Vec2> force(g.node_count());
  std::vector<double> normal(g.node_count());
  for (std::size_t n = 0; n < g.node_count(); ++n)
  {
    const Tensor3<2>& c = s[n];
    Vec2 f;
    for (int mu = 0; mu < 2; ++mu)
    {
      double x = dN[0][n](mu, 0) + dN[1][n](mu, 1);
      for (int al = 0; al < 2; ++al)
        for (int ga = 0; ga < 2; ++ga) x += c(mu, al, ga) * N[n](ga, al) + c(al, al, ga) * N[n](mu, ga);
      for (int al = 0; al < 2; ++al) x += V[n](al) * bm[n](mu, al);
      f(mu) = x;
    }
    double divV = dV[0][n](0) + dV[1][n](1);
    for (int al = 0; al < 2; ++al)
      for (int ga = 0; ga < 2; ++ga) divV += c(al, al, ga) * V[n](ga);
    const Mat2 P = k.sigma[n] + bm[n] * k.M[n]; // sigma^{ba} + M^{ma} b^b_m
    force[n] = f;
    normal[n] = contract(P, b[n]) - divV;
  }
  return {Vec2Field(g, std::move(force)), ScalarField(g, std::move(normal))};
}

double CosseratEquilibrium::max_norm() const { return std::max({force.max_norm(), moment.max_norm(), couple.max_norm()}); }

CosseratEquilibrium cosserat_equilibrium_residual(const CosseratBases& bases, const std::array<VecField, 2>& T,
                                                  const std::array<VecField, 2>& M, const VecField& k)
{
  const ParamGrid& g = bases.d.grid();
  for (const auto* f : {&T[0], &T[1], &M[0], &M[1], &k}) require_same_grid(g, f->grid(), "cosserat_equilibrium_residual");
  const ScalarField root = zip([](const Vec3& a1, const Vec3& a2) { return std::sqrt(a1.dot(a1) * a2.dot(a2) - std::pow(a1.dot(a2), 2)); },
                               bases.a[0], bases.a[1]);
  auto divergence = [&](const std::array<VecField, 2>& X) {
    const VecField w1 = zip([](double r, const Vec3& x) -> Vec3 { return r * x; }, root, X[0]);
    const VecField w2 = zip([](double r, const Vec3& x) -> Vec3 { return r * x; }, root, X[1]);
    return zip([](double r, const Vec3& p, const Vec3& q) -> Vec3 { return (p + q) / r; }, root, partial(w1, 1), partial(w2, 2));
  };
  VecField couple = VecField::generate(g, [&](int i, int j) -> Vec3 {
    return bases.a[0](i, j).cross(T[0](i, j)) + bases.a[1](i, j).cross(T[1](i, j)) + bases.D[0](i, j).cross(M[0](i, j)) +
           bases.D[1](i, j).cross(M[1](i, j)) + bases.d(i, j).cross(k(i, j));
  });
  return {divergence(T), zip([](const Vec3& x, const Vec3& y) -> Vec3 { return x - y; }, divergence(M), k), std::move(couple)};
}

PlateMode parse_plate_mode(const std::string& name)
{
  if (name == "pure_bending") return PlateMode::pure_bending;
  if (name == "small_strain") return PlateMode::small_strain;
  throw Error("unknown plate mode '" + name + "', expected pure_bending or small_strain");
}

std::string to_string(PlateMode m) { return m == PlateMode::pure_bending ? "pure_bending" : "small_strain"; }

PlateSource PlateSource::zero(const ParamGrid& grid)
{
  return {ScalarField::zero(grid), Vec2Field::zero(grid), Vec2Field::zero(grid), ScalarField::zero(grid)};
}

PlateSource plate_source(const IncompatibilitySet& s)
{
  const double J = s.J.max_norm();
  if (J > kl_source_tolerance)
  {
    std::ostringstream os;
    os << "incompatibility source with J != 0 (max |J| = " << J
       << ") rejected: a Kirchhoff-Love plate needs Lambda_[ab] = 0, so J must vanish";
    throw Error(os.str());
  }
  const double I = s.I.max_norm();
  if (I > kl_source_tolerance)
  {
    std::ostringstream os;
    os << "incompatibility source with I_a != 0 (max |I_a| = " << I << ") rejected: I_a vanishes under d = n";
    throw Error(os.str());
  }
  PlateSource out = PlateSource::zero(s.grid());
  out.K = s.K;
  out.L = s.L;
  return out;
}

PlateBC PlateBC::clamped(const ParamGrid& grid)
{
  return {PlateBoundary::dirichlet, Mat2Field::zero(grid), Mat2Field::zero(grid)};
}

namespace
{

using SpMat = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;
constexpr int kComp = 6; // E11, E12, E22, L11, L12, L22

/// Field value and its Jacobian with respect to all nodal unknowns.
struct SVar
{
  Eigen::VectorXd v;
  SpMat J;
};

SVar operator+(const SVar& x, const SVar& y) { return {x.v + y.v, x.J + y.J}; }
SVar operator-(const SVar& x, const SVar& y) { return {x.v - y.v, x.J - y.J}; }
SVar operator*(double s, const SVar& x) { return {s * x.v, s * x.J}; }
SVar operator-(const SVar& x, const Eigen::VectorXd& c) { return {x.v - c, x.J}; }
SVar operator*(const SpMat& D, const SVar& x) { return {D * x.v, SpMat(D * x.J)}; }
SVar mul(const SVar& x, const SVar& y)
{
  SpMat J = SpMat(x.v.asDiagonal() * y.J) + SpMat(y.v.asDiagonal() * x.J);
  return {x.v.cwiseProduct(y.v), std::move(J)};
}

using AD = Eigen::AutoDiffScalar<Eigen::Matrix<double, kComp, 1>>;

template <class S>
struct Local
{
  S sig[2][2];
  S M[2][2];
  S b[2][2];
  S bm[2][2]; ///< b^m_a = a^{mn} b_na
};

/// Flat plate (A = I, B = 0): a = I + 2E, b = -Lambda.
template <class S>
Local<S> local_state(const S* x, const Moduli& c, bool pure)
{
  using std::sqrt;
  const S E[2][2] = {{x[0], x[1]}, {x[1], x[2]}};
  const S L[2][2] = {{x[3], x[4]}, {x[4], x[5]}};
  const S a11 = 1.0 + 2.0 * E[0][0];
  const S a12 = 2.0 * E[0][1];
  const S a22 = 1.0 + 2.0 * E[1][1];
  const S det = a11 * a22 - a12 * a12;
  const S j = sqrt(det);
  const S ai[2][2] = {{a22 / det, -a12 / det}, {-a12 / det, a11 / det}};
  const S trE = E[0][0] + E[1][1];
  const S trL = L[0][0] + L[1][1];
  Local<S> out;
  for (int p = 0; p < 2; ++p)
    for (int q = 0; q < 2; ++q)
    {
      const double delta = p == q ? 1.0 : 0.0;
      out.sig[p][q] = pure ? S(0.0) : S(c.membrane * (c.nu * trE * delta + (1.0 - c.nu) * E[p][q]) / j);
      out.M[p][q] = -c.bending * (c.nu * trL * delta + (1.0 - c.nu) * L[p][q]) / j;
      out.b[p][q] = -L[p][q];
    }
  for (int p = 0; p < 2; ++p)
    for (int q = 0; q < 2; ++q) out.bm[p][q] = ai[p][0] * out.b[0][q] + ai[p][1] * out.b[1][q];
  return out;
}

/// N^{ma} = sigma^{ma} + M^{ba} b^m_b
template <class S>
S membrane_flux(const Local<S>& l, int mu, int al)
{
  return l.sig[mu][al] + l.M[0][al] * l.bm[mu][0] + l.M[1][al] * l.bm[mu][1];
}

/// (sigma^{ba} + M^{ma} b^b_m) b_ba
template <class S>
S normal_load(const Local<S>& l)
{
  S v = S(0.0);
  for (int be = 0; be < 2; ++be)
    for (int al = 0; al < 2; ++al) v += (l.sig[be][al] + l.M[0][al] * l.bm[be][0] + l.M[1][al] * l.bm[be][1]) * l.b[be][al];
  return v;
}

struct Operators
{
  SpMat D1, D2, D11, D22, D12;
};

SpMat stencil_matrix(const ParamGrid& g, int dir, Stencil (*make)(int, double, int))
{
  Triplets t;
  const int n1 = g.n1(), n2 = g.n2();
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i)
    {
      const Stencil s = dir == 1 ? make(n1, g.h(1), i) : make(n2, g.h(2), j);
      for (int m = 0; m < s.size; ++m)
      {
        const std::size_t col = dir == 1 ? g.node(s.index[m], j) : g.node(i, s.index[m]);
        t.emplace_back(static_cast<int>(g.node(i, j)), static_cast<int>(col), s.weight[m]);
      }
    }
  const int n = static_cast<int>(g.node_count());
  SpMat D(n, n);
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

bool on_boundary(const ParamGrid& g, int i, int j) { return i == 0 || j == 0 || i == g.n1() - 1 || j == g.n2() - 1; }

Operators operators(const ParamGrid& g)
{
  Operators o;
  o.D1 = stencil_matrix(g, 1, &first_derivative_stencil);
  o.D2 = stencil_matrix(g, 2, &first_derivative_stencil);
  o.D11 = stencil_matrix(g, 1, &second_derivative_stencil);
  o.D22 = stencil_matrix(g, 2, &second_derivative_stencil);
  // interior mixed derivative from the seven-point stencil, which unlike the
  // product of central differences does not annihilate the (-1)^(i+j) mode
  const Eigen::SparseMatrix<double, Eigen::RowMajor> wide = o.D2 * o.D1;
  Triplets t;
  const double w = 1.0 / (2.0 * g.h(1) * g.h(2));
  for (int j = 0; j < g.n2(); ++j)
    for (int i = 0; i < g.n1(); ++i)
    {
      const int row = static_cast<int>(g.node(i, j));
      if (on_boundary(g, i, j))
      {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(wide, row); it; ++it)
          t.emplace_back(row, static_cast<int>(it.col()), it.value());
        continue;
      }
      const int di[7] = {1, 1, 0, 0, -1, 0, -1};
      const int dj[7] = {1, 0, 1, 0, 0, -1, -1};
      const double c[7] = {1, -1, -1, 2, -1, -1, 1};
      for (int q = 0; q < 7; ++q) t.emplace_back(row, static_cast<int>(g.node(i + di[q], j + dj[q])), w * c[q]);
    }
  o.D12.resize(wide.rows(), wide.cols());
  o.D12.setFromTriplets(t.begin(), t.end());
  return o;
}

template <class F>
SVar nodal(const Eigen::VectorXd& u, F&& f)
{
  const int n = static_cast<int>(u.size() / kComp);
  SVar out{Eigen::VectorXd(n), SpMat(n, n * kComp)};
  Triplets t;
  t.reserve(static_cast<std::size_t>(n) * kComp);
  for (int k = 0; k < n; ++k)
  {
    AD x[kComp];
    for (int c = 0; c < kComp; ++c) x[c] = AD(u[kComp * k + c], kComp, c);
    const AD r = f(k, x);
    out.v[k] = r.value();
    if (r.derivatives().size() == kComp)
      for (int c = 0; c < kComp; ++c)
        if (r.derivatives()(c) != 0.0) t.emplace_back(k, kComp * k + c, r.derivatives()(c));
  }
  out.J.setFromTriplets(t.begin(), t.end());
  return out;
}

Vec2 outward_normal(const ParamGrid& g, int i, int j)
{
  Vec2 n = Vec2::Zero();
  if (i == 0) n(0) -= 1.0;
  if (i == g.n1() - 1) n(0) += 1.0;
  if (j == 0) n(1) -= 1.0;
  if (j == g.n2() - 1) n(1) += 1.0;
  return n.normalized();
}


struct Block
{
  SVar eq;
  std::vector<int> rows; ///< node rows kept
};

class PlateProblem
{
public:
  PlateProblem(const ParamGrid& g, PlateMode mode, const PlateSource& src, const PlateBC& bc, const Material& m)
      : g_(g), mode_(mode), src_(src), bc_(bc), c_(moduli(m)), ops_(operators(g))
  {
    const int n = static_cast<int>(g.node_count());
    const bool dirichlet = bc.kind == PlateBoundary::dirichlet;
    for (int j = 0; j < g.n2(); ++j)
      for (int i = 0; i < g.n1(); ++i)
      {
        const bool bnd = on_boundary(g, i, j);
        if (!dirichlet || !bnd) interior_.push_back(static_cast<int>(g.node(i, j)));
        if (!dirichlet && bnd) boundary_.push_back(static_cast<int>(g.node(i, j)));
      }
    col_.assign(static_cast<std::size_t>(n) * kComp, -1);
    for (int k = 0; k < n; ++k)
    {
      const int i = k % g.n1(), j = k / g.n1();
      const bool fixed_node = dirichlet && on_boundary(g, i, j);
      for (int c = 0; c < kComp; ++c)
      {
        const bool strain = c < 3;
        if (fixed_node || (strain && mode == PlateMode::pure_bending)) continue;
        col_[kComp * k + c] = free_++;
      }
    }
    Triplets t;
    for (std::size_t q = 0; q < col_.size(); ++q)
      if (col_[q] >= 0) t.emplace_back(static_cast<int>(q), col_[q], 1.0);
    P_.resize(n * kComp, free_);
    P_.setFromTriplets(t.begin(), t.end());
  }

  int free_count() const { return free_; }

  Eigen::VectorXd initial() const
  {
    const int n = static_cast<int>(g_.node_count());
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n * kComp);
    if (bc_.kind != PlateBoundary::dirichlet) return u;
    for (int k = 0; k < n; ++k)
    {
      if (!on_boundary(g_, k % g_.n1(), k / g_.n1())) continue;
      const Mat2& E = bc_.E[k];
      const Mat2& L = bc_.Lam[k];
      const double vals[kComp] = {E(0, 0), 0.5 * (E(0, 1) + E(1, 0)), E(1, 1), L(0, 0), 0.5 * (L(0, 1) + L(1, 0)), L(1, 1)};
      for (int c = 0; c < kComp; ++c)
        if (mode_ == PlateMode::small_strain || c >= 3) u[kComp * k + c] = vals[c];
    }
    return u;
  }

  Eigen::VectorXd expand(const Eigen::VectorXd& u, const Eigen::VectorXd& step) const { return u + P_ * step; }

  std::vector<Block> blocks(const Eigen::VectorXd& u) const
  {
    const bool pure = mode_ == PlateMode::pure_bending;
    auto comp = [&](int c) { return nodal(u, [c](int, const AD* x) { return x[c]; }); };
    auto local = [&](auto&& pick) {
      return nodal(u, [&](int, const AD* x) { return pick(local_state<AD>(x, c_, pure)); });
    };
    const SVar L11 = comp(3), L12 = comp(4), L22 = comp(5);
    const SVar quad = nodal(u, [](int, const AD* x) { return AD(-x[3] * x[5] + x[4] * x[4]); });
    SVar M[2][2];
    for (int p = 0; p < 2; ++p)
      for (int q = p; q < 2; ++q) M[p][q] = M[q][p] = local([&](const Local<AD>& l) { return l.M[p][q]; });
    const SVar Mdd = ops_.D11 * M[0][0] + 2.0 * (ops_.D12 * M[0][1]) + ops_.D22 * M[1][1];
    const Eigen::VectorXd L1 = component_vector(src_.L, 0), L2 = component_vector(src_.L, 1);

    std::vector<Block> out;
    if (pure)
    {
      out.push_back({quad - scalar_vector(src_.K), interior_});
    }
    else
    {
      const SVar E11 = comp(0), E12 = comp(1), E22 = comp(2);
      const SVar comp_eq = 2.0 * (ops_.D12 * E12) - ops_.D22 * E11 - ops_.D11 * E22 + quad;
      out.push_back({comp_eq - scalar_vector(src_.K), interior_});
    }
    out.push_back({(-1.0 * (ops_.D2 * L11) + ops_.D1 * L12) - L1, interior_});
    out.push_back({(-1.0 * (ops_.D2 * L12) + ops_.D1 * L22) - L2, interior_});
    if (pure)
    {
      out.push_back({-1.0 * Mdd - scalar_vector(src_.f3), interior_});
    }
    else
    {
      SVar bm[2][2];
      for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q) bm[p][q] = local([&](const Local<AD>& l) { return l.bm[p][q]; });
      const SVar dM[2][2] = {{ops_.D1 * M[0][0], ops_.D1 * M[0][1]}, {ops_.D2 * M[1][0], ops_.D2 * M[1][1]}};
      // divergence V^a = M^{ba}_{,b}
      const SVar V[2] = {dM[0][0] + dM[1][0], dM[0][1] + dM[1][1]};
      SVar N[2][2], W[2];
      for (int mu = 0; mu < 2; ++mu)
      {
        for (int al = 0; al < 2; ++al) N[mu][al] = local([&](const Local<AD>& l) { return membrane_flux(l, mu, al); });
        W[mu] = mul(V[0], bm[mu][0]) + mul(V[1], bm[mu][1]);
        const SVar eq = ops_.D1 * N[mu][0] + ops_.D2 * N[mu][1] + W[mu];
        out.push_back({eq - component_vector(src_.f, mu), interior_});
      }
      // divergence and curl of the force equations with compact second differences;
      // they fix the membrane modes that central first differences cannot see
      const Eigen::VectorXd f1 = component_vector(src_.f, 0), f2 = component_vector(src_.f, 1);
      const SVar div = ops_.D11 * N[0][0] + ops_.D12 * (N[0][1] + N[1][0]) + ops_.D22 * N[1][1] + ops_.D1 * W[0] + ops_.D2 * W[1];
      out.push_back({div - Eigen::VectorXd(ops_.D1 * f1 + ops_.D2 * f2), interior_});
      const SVar curl = ops_.D12 * N[0][0] + ops_.D22 * N[0][1] - ops_.D11 * N[1][0] - ops_.D12 * N[1][1] + ops_.D2 * W[0] - ops_.D1 * W[1];
      out.push_back({curl - Eigen::VectorXd(ops_.D2 * f1 - ops_.D1 * f2), interior_});
      const SVar P3 = local([&](const Local<AD>& l) { return normal_load(l); });
      out.push_back({P3 - Mdd - scalar_vector(src_.f3), interior_});
    }
    if (!boundary_.empty())
    {
      for (int al = 0; al < 2; ++al)
      {
        if (!pure)
          out.push_back({nodal(u, [&](int k, const AD* x) {
                           const Local<AD> l = local_state<AD>(x, c_, pure);
                           const Vec2 n = outward_normal(g_, k % g_.n1(), k / g_.n1());
                           return AD(l.sig[al][0] * n(0) + l.sig[al][1] * n(1));
                         }),
                         boundary_});
        out.push_back({nodal(u, [&](int k, const AD* x) {
                         const Local<AD> l = local_state<AD>(x, c_, pure);
                         const Vec2 n = outward_normal(g_, k % g_.n1(), k / g_.n1());
                         return AD(l.M[al][0] * n(0) + l.M[al][1] * n(1));
                       }),
                       boundary_});
      }
    }
    return out;
  }

  /// Stacks the kept rows of every block, restricted to free unknowns and scaled.
  void stack(const std::vector<Block>& blocks, const std::vector<double>& scale, Eigen::VectorXd& r, SpMat& J) const
  {
    int rows = 0;
    for (const auto& b : blocks) rows += static_cast<int>(b.rows.size());
    r.resize(rows);
    Triplets t;
    int base = 0;
    for (std::size_t e = 0; e < blocks.size(); ++e)
    {
      const SpMat Jf = blocks[e].eq.J * P_;
      SpMat Jr = SpMat(Jf.transpose()); // columns are node rows
      for (std::size_t q = 0; q < blocks[e].rows.size(); ++q)
      {
        const int k = blocks[e].rows[q];
        r[base + static_cast<int>(q)] = scale[e] * blocks[e].eq.v[k];
        for (SpMat::InnerIterator it(Jr, k); it; ++it) t.emplace_back(base + static_cast<int>(q), static_cast<int>(it.row()), scale[e] * it.value());
      }
      base += static_cast<int>(blocks[e].rows.size());
    }
    J.resize(rows, free_);
    J.setFromTriplets(t.begin(), t.end());
  }

  std::vector<double> scales(const std::vector<Block>& blocks) const
  {
    std::vector<double> out;
    for (const auto& b : blocks)
    {
      const SpMat Jf = b.eq.J * P_;
      const SpMat Jr = SpMat(Jf.transpose());
      double big = 0.0;
      for (int k : b.rows)
      {
        double row = 0.0;
        for (SpMat::InnerIterator it(Jr, k); it; ++it) row += std::abs(it.value());
        big = std::max(big, row);
      }
      out.push_back(big > 0.0 ? 1.0 / big : 1.0);
    }
    return out;
  }

  static double unscaled_max(const std::vector<Block>& blocks)
  {
    double m = 0.0;
    for (const auto& b : blocks)
      for (int k : b.rows) m = std::max(m, std::abs(b.eq.v[k]));
    return m;
  }

  KLState state(const Eigen::VectorXd& u, const Material& mat) const
  {
    KLState k = KLState::zero(g_, mat);
    const bool pure = mode_ == PlateMode::pure_bending;
    const std::size_t n = g_.node_count();
    std::vector<Mat2> E(n), L(n), sig(n), M(n);
    for (std::size_t q = 0; q < n; ++q)
    {
      const double* x = u.data() + kComp * q;
      E[q] << x[0], x[1], x[1], x[2];
      L[q] << x[3], x[4], x[4], x[5];
      const Local<double> l = local_state<double>(x, c_, pure);
      sig[q] << l.sig[0][0], l.sig[0][1], l.sig[1][0], l.sig[1][1];
      M[q] << l.M[0][0], l.M[0][1], l.M[1][0], l.M[1][1];
    }
    k.E = Mat2Field(g_, std::move(E));
    k.Lam = Mat2Field(g_, std::move(L));
    k.sigma = Mat2Field(g_, std::move(sig));
    k.M = Mat2Field(g_, std::move(M));
    return k;
  }

  const Operators& ops() const { return ops_; }

private:
  Eigen::VectorXd scalar_vector(const ScalarField& f) const
  {
    return Eigen::Map<const Eigen::VectorXd>(&f[0], static_cast<Eigen::Index>(g_.node_count()));
  }
  Eigen::VectorXd component_vector(const Vec2Field& f, int c) const
  {
    Eigen::VectorXd v(g_.node_count());
    for (std::size_t k = 0; k < g_.node_count(); ++k) v[static_cast<Eigen::Index>(k)] = f[k](c);
    return v;
  }

  const ParamGrid& g_;
  PlateMode mode_;
  const PlateSource& src_;
  const PlateBC& bc_;
  Moduli c_;
  Operators ops_;
  std::vector<int> interior_;
  std::vector<int> boundary_;
  std::vector<int> col_;
  int free_ = 0;
  SpMat P_;
};

void require_flat_plate(const SurfaceGeometry& geo)
{
  double dev = 0.0;
  for (std::size_t n = 0; n < geo.grid().node_count(); ++n)
    dev = std::max({dev, (geo.A[n] - Mat2::Identity()).cwiseAbs().maxCoeff(), geo.B[n].cwiseAbs().maxCoeff()});
  if (dev > 1e-10) throw Error("solve_plate: reference must be a flat Cartesian plate (A = I, B = 0)");
}

/// Multiplier field for pure bending: minimum-norm least-squares solution of the
/// force equations and the normal equation with Lambda fixed.
double recover_multiplier(const ParamGrid& g, const Operators& ops, const PlateSource& src, KLState& k)
{
  const int n = static_cast<int>(g.node_count());
  // unknown layout 3k + (0: s11, 1: s12, 2: s22)
  auto sym = [](int p, int q) { return p == q ? (p == 0 ? 0 : 2) : 1; };
  Triplets t;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * n);
  const Mat2Field b = k.Lam.map([](const Mat2& L) -> Mat2 { return -L; });
  const Mat2Field bm = b; // a = I
  const Mat2Field MB = zip([](const Mat2& M, const Mat2& bx) -> Mat2 { return bx * M; }, k.M, bm);
  const Mat2Field dMB[2] = {partial(MB, 1), partial(MB, 2)};
  const Mat2Field dM[2] = {partial(k.M, 1), partial(k.M, 2)};
  const ScalarField Mdd = zip([](const Mat2& x, const Mat2& y, const Mat2& z) { return x(0, 0) + 2.0 * y(0, 1) + z(1, 1); },
                              partial2(k.M, 1), partial12(k.M), partial2(k.M, 2));
  const SpMat* D[2] = {&ops.D1, &ops.D2};
  double s_force = 0.0;
  for (int dir = 0; dir < 2; ++dir)
    for (int r = 0; r < D[dir]->outerSize(); ++r)
      for (SpMat::InnerIterator it(*D[dir], r); it; ++it) s_force = std::max(s_force, std::abs(it.value()));
  s_force = 1.0 / s_force;
  double bmax = 0.0;
  for (int q = 0; q < n; ++q) bmax = std::max(bmax, b[q].cwiseAbs().maxCoeff());
  const double s_normal = bmax > 0.0 ? 1.0 / bmax : 1.0;
  for (int mu = 0; mu < 2; ++mu)
  {
    for (int al = 0; al < 2; ++al)
      for (int r = 0; r < D[al]->outerSize(); ++r)
        for (SpMat::InnerIterator it(*D[al], r); it; ++it)
          t.emplace_back(static_cast<int>(it.row()) * 3 + mu, static_cast<int>(it.col()) * 3 + sym(mu, al), s_force * it.value());
    for (int q = 0; q < n; ++q)
    {
      double known = dMB[0][q](mu, 0) + dMB[1][q](mu, 1);
      for (int al = 0; al < 2; ++al) known += (dM[0][q](0, al) + dM[1][q](1, al)) * bm[q](mu, al);
      rhs[3 * q + mu] = s_force * (src.f[q](mu) - known);
    }
  }
  for (int q = 0; q < n; ++q)
  {
    for (int p = 0; p < 2; ++p)
      for (int r = 0; r < 2; ++r) t.emplace_back(3 * q + 2, 3 * q + sym(p, r), s_normal * b[q](p, r));
    rhs[3 * q + 2] = s_normal * (Mdd[q] - contract(bm[q] * k.M[q], b[q]));
  }
  SpMat A(3 * n, 3 * n);
  A.setFromTriplets(t.begin(), t.end());
  SpMat H = SpMat(A.transpose() * A);
  double hmax = 0.0;
  for (int q = 0; q < H.outerSize(); ++q) hmax = std::max(hmax, H.coeff(q, q));
  SpMat reg(3 * n, 3 * n);
  reg.setIdentity();
  H += (1e-12 * std::max(hmax, 1.0)) * reg;
  Eigen::SimplicialLDLT<SpMat> solver(H);
  if (solver.info() != Eigen::Success) throw NumericalError("solve_plate: multiplier system factorization failed");
  const Eigen::VectorXd x = solver.solve(A.transpose() * rhs);
  std::vector<Mat2> sig(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) sig[q] << x[3 * q], x[3 * q + 1], x[3 * q + 1], x[3 * q + 2];
  k.sigma = Mat2Field(g, std::move(sig));
  const Eigen::VectorXd res = A * x - rhs;
  double worst = 0.0;
  for (int q = 0; q < n; ++q)
  {
    worst = std::max({worst, std::abs(res[3 * q]) / s_force, std::abs(res[3 * q + 1]) / s_force, std::abs(res[3 * q + 2]) / s_normal});
  }
  return worst;
}

std::string format_log(const std::vector<IterationRecord>& log)
{
  std::ostringstream os;
  write_iteration_log(os, log);
  return os.str();
}

} // namespace

PlateSolution solve_plate(const SurfaceGeometry& geo, PlateMode mode, const PlateSource& source, const PlateBC& bc,
                          const Material& m, const PlateOptions& opt)
{
  m.validate();
  require_flat_plate(geo);
  const ParamGrid& g = geo.grid();
  require_same_grid(g, source.grid(), "solve_plate source");
  if (bc.kind == PlateBoundary::dirichlet)
  {
    require_same_grid(g, bc.E.grid(), "solve_plate boundary data");
    require_same_grid(g, bc.Lam.grid(), "solve_plate boundary data");
  }
  for (const ScalarField* f : {&source.K, &source.f3}) require_finite(*f, "solve_plate source");
  require_finite(source.L, "solve_plate source");
  require_finite(source.f, "solve_plate source");

  const PlateProblem problem(g, mode, source, bc, m);
  Eigen::VectorXd u = problem.initial();
  auto blocks = problem.blocks(u);
  const std::vector<double> scale = problem.scales(blocks);
  Eigen::VectorXd r;
  SpMat J;
  problem.stack(blocks, scale, r, J);
  double cost = 0.5 * r.squaredNorm();

  PlateSolution out{KLState::zero(g, m)};
  double mu = 0.0;
  double grad0 = 0.0;
  for (int it = 1; it <= opt.max_iterations; ++it)
  {
    const Eigen::VectorXd grad = J.transpose() * r;
    const double gnorm = grad.lpNorm<Eigen::Infinity>();
    if (it == 1) grad0 = gnorm;
    if (grad0 == 0.0 && cost > 1e-28)
    {
      // pure bending with only a Gauss source: the cost is even in Lambda, so the zero start is a saddle
      out.stop_reason = "stationary initial state";
      break;
    }
    if (gnorm <= opt.gradient_tol * grad0)
    {
      out.converged = true;
      out.stop_reason = "gradient";
      break;
    }
    SpMat H = SpMat(J.transpose() * J);
    Eigen::VectorXd diag = H.diagonal();
    const double dmax = diag.maxCoeff();
    bool accepted = false;
    Eigen::VectorXd step, u_try, r_try;
    SpMat J_try;
    double cost_try = cost;
    std::vector<Block> b_try;
    for (int attempt = 0; attempt < 16 && !accepted; ++attempt)
    {
      SpMat A = H;
      for (int q = 0; q < A.rows(); ++q) A.coeffRef(q, q) += mu * std::max(diag[q], 1e-12 * dmax) + 1e-14 * dmax;
      Eigen::CholmodSupernodalLLT<SpMat> solver(A);
      if (solver.info() == Eigen::Success)
      {
        step = -solver.solve(grad);
        u_try = problem.expand(u, step);
        b_try = problem.blocks(u_try);
        problem.stack(b_try, scale, r_try, J_try);
        cost_try = 0.5 * r_try.squaredNorm();
        accepted = std::isfinite(cost_try) && cost_try < cost;
      }
      if (!accepted) mu = mu == 0.0 ? 1e-6 : 10.0 * mu;
    }
    if (!accepted)
    {
      // no descent left at round-off: the current iterate is stationary
      out.converged = gnorm <= 1e3 * opt.gradient_tol * grad0 || cost < 1e-28;
      out.stop_reason = "no descent step";
      break;
    }
    const double decrease = cost - cost_try;
    out.log.push_back({it, std::sqrt(2.0 * cost_try), step.norm(), mu});
    u = std::move(u_try);
    r = std::move(r_try);
    J = std::move(J_try);
    blocks = std::move(b_try);
    const double prev = cost;
    cost = cost_try;
    if (decrease <= opt.plateau_rtol * prev)
    {
      out.converged = true;
      out.stop_reason = "plateau";
      break;
    }
    if (step.norm() <= opt.step_tol * (1.0 + u.norm()))
    {
      out.converged = true;
      out.stop_reason = "step";
      break;
    }
    mu = mu < 1e-9 ? 0.0 : 0.1 * mu;
  }
  if (!out.converged && out.stop_reason.empty()) out.stop_reason = "iteration limit";
  out.state = problem.state(u, m);
  out.residual_max = PlateProblem::unscaled_max(blocks);
  if (mode == PlateMode::pure_bending) out.multiplier_residual = recover_multiplier(g, problem.ops(), source, out.state);
  if (!out.converged && opt.throw_on_failure)
    throw NumericalError("solve_plate did not converge (" + out.stop_reason + ")\n" + format_log(out.log));
  return out;
}

PlateSolution solve_plate(const SurfaceGeometry& geo, PlateMode mode, const IncompatibilitySet& source, const PlateBC& bc,
                          const Material& m, const PlateOptions& opt)
{
  return solve_plate(geo, mode, plate_source(source), bc, m, opt);
}

PlateSolution solve_plate(const SurfaceGeometry& geo, PlateMode mode, const TorsionSet& source, const PlateBC& bc,
                          const Material& m, const PlateOptions& opt)
{
  m.validate();
  require_flat_plate(geo);
  const ParamGrid& g = geo.grid();
  PlateSource src = PlateSource::zero(g);
  KLState state = KLState::zero(g, m);
  if (bc.kind == PlateBoundary::dirichlet)
  {
    state.E = bc.E;
    state.Lam = bc.Lam;
  }
  PlateSolution sol{KLState::zero(g, m)};
  for (int outer = 1; outer <= opt.max_outer; ++outer)
  {
    const KLRelations rhs = kl_torsion_rhs(geo, state, source);
    const double change = KLRelations{zip([](double p, double q) { return p - q; }, rhs.K, src.K),
                                      zip([](const Vec2& p, const Vec2& q) -> Vec2 { return p - q; }, rhs.L, src.L)}
                              .max_norm();
    if (outer > 1 && change <= opt.outer_tol)
    {
      sol.outer_iterations = outer - 1;
      return sol;
    }
    src.K = rhs.K;
    src.L = rhs.L;
    sol = solve_plate(geo, mode, src, bc, m, opt);
    state = sol.state;
  }
  sol.converged = false;
  sol.stop_reason = "source update limit";
  sol.outer_iterations = opt.max_outer;
  if (opt.throw_on_failure) throw NumericalError("solve_plate: torsion source did not settle after " + std::to_string(opt.max_outer) + " updates");
  return sol;
}

namespace
{

constexpr double kManufacturedStep = 1e-3;

template <class F>
auto d1(const F& f, double t1, double t2, int dir)
{
  const double h = kManufacturedStep;
  auto at = [&](double s) { return dir == 1 ? f(t1 + s, t2) : f(t1, t2 + s); };
  return (at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h);
}

template <class F>
auto d2(const F& f, double t1, double t2, int dir)
{
  const double h = kManufacturedStep;
  auto at = [&](double s) { return dir == 1 ? f(t1 + s, t2) : f(t1, t2 + s); };
  return (-at(-2 * h) + 16.0 * at(-h) - 30.0 * at(0.0) + 16.0 * at(h) - at(2 * h)) / (12.0 * h * h);
}

template <class F>
auto d12(const F& f, double t1, double t2)
{
  return d1([&](double x, double y) { return d1(f, x, y, 1); }, t1, t2, 2);
}

} // namespace

ManufacturedPlate manufacture_plate(const ParamGrid& grid, PlateMode mode, const Mat2Function& Efn, const Mat2Function& Lfn,
                                    const Material& m)
{
  m.validate();
  const bool pure = mode == PlateMode::pure_bending;
  if (!Lfn) throw Error("manufacture_plate: bending strain function required");
  if (!pure && !Efn) throw Error("manufacture_plate: membrane strain function required in small_strain mode");
  const Moduli c = moduli(m);
  auto Ef = [&](double x, double y) -> Mat2 {
    if (pure) return Mat2::Zero();
    const Mat2 e = Efn(x, y);
    return 0.5 * (e + e.transpose());
  };
  auto Lf = [&](double x, double y) -> Mat2 {
    const Mat2 l = Lfn(x, y);
    return 0.5 * (l + l.transpose());
  };
  auto local = [&](double x, double y) {
    const Mat2 E = Ef(x, y), L = Lf(x, y);
    const double u[kComp] = {E(0, 0), E(0, 1), E(1, 1), L(0, 0), L(0, 1), L(1, 1)};
    return local_state<double>(u, c, pure);
  };
  auto Mc = [&](int p, int q) { return [&, p, q](double x, double y) { return local(x, y).M[p][q]; }; };
  const std::size_t nodes = grid.node_count();
  std::vector<Mat2> Ev(nodes), Lv(nodes);
  std::vector<double> Kv(nodes), f3v(nodes);
  std::vector<Vec2> Lsv(nodes), fv(nodes, Vec2::Zero());
  for (int j = 0; j < grid.n2(); ++j)
    for (int i = 0; i < grid.n1(); ++i)
    {
      const double x = grid.theta1(i), y = grid.theta2(j);
      const std::size_t n = grid.node(i, j);
      const Mat2 E = Ef(x, y), L = Lf(x, y);
      Ev[n] = E;
      Lv[n] = L;
      double K = -L(0, 0) * L(1, 1) + L(0, 1) * L(0, 1);
      if (!pure)
      {
        auto comp = [&](int p, int q) { return [&, p, q](double s, double t) { return Ef(s, t)(p, q); }; };
        K += 2.0 * d12(comp(0, 1), x, y) - d2(comp(0, 0), x, y, 2) - d2(comp(1, 1), x, y, 1);
      }
      Kv[n] = K;
      const Mat2 dL1 = d1(Lf, x, y, 1), dL2 = d1(Lf, x, y, 2);
      Lsv[n] = Vec2(-dL2(0, 0) + dL1(0, 1), -dL2(1, 0) + dL1(1, 1));
      const double Mdd = d2(Mc(0, 0), x, y, 1) + 2.0 * d12(Mc(0, 1), x, y) + d2(Mc(1, 1), x, y, 2);
      if (pure)
      {
        f3v[n] = -Mdd;
        continue;
      }
      const Local<double> l = local(x, y);
      Vec2 f;
      for (int mu = 0; mu < 2; ++mu)
      {
        auto N = [&, mu](int al) { return [&, mu, al](double s, double t) { return membrane_flux(local(s, t), mu, al); }; };
        double v = d1(N(0), x, y, 1) + d1(N(1), x, y, 2);
        for (int al = 0; al < 2; ++al) v += (d1(Mc(0, al), x, y, 1) + d1(Mc(1, al), x, y, 2)) * l.bm[mu][al];
        f(mu) = v;
      }
      fv[n] = f;
      f3v[n] = normal_load(l) - Mdd;
    }
  const Mat2Field E(grid, std::move(Ev)), L(grid, std::move(Lv));
  return {{ScalarField(grid, std::move(Kv)), Vec2Field(grid, std::move(Lsv)), Vec2Field(grid, std::move(fv)),
           ScalarField(grid, std::move(f3v))},
          {PlateBoundary::dirichlet, E, L},
          E,
          L};
}

void write_iteration_log(std::ostream& os, const std::vector<IterationRecord>& log)
{
  os << "iteration,residual,step,damping\n";
  for (const auto& r : log)
    os << r.iteration << ',' << format_number(r.residual) << ',' << format_number(r.step) << ',' << format_number(r.damping) << '\n';
}

} // namespace dshell

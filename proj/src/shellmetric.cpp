#include "dshell/shellmetric.hpp"

#include <sstream>

namespace dshell
{

StrainSet StrainSet::zero(const ParamGrid& grid)
{
  return {Mat2Field::zero(grid), Mat2Field::zero(grid), Vec2Field::zero(grid), Vec2Field::zero(grid),
          ScalarField::zero(grid)};
}

void validate_strains(const SurfaceGeometry& geo, const StrainSet& s)
{
  const ParamGrid& g = geo.grid();
  for (const auto* f : {&s.E, &s.Lam})
    if (!(f->grid() == g)) throw Error("strain fields live on a different grid than the surface");
  if (!(s.lam.grid() == g) || !(s.Del.grid() == g) || !(s.del.grid() == g))
    throw Error("strain fields live on a different grid than the surface");
  require_finite(s.E, "strains E");
  require_finite(s.Lam, "strains Lambda_ab");
  require_finite(s.lam, "strains Lambda_a");
  require_finite(s.Del, "strains Delta_a");
  require_finite(s.del, "strains Delta");
  for (std::size_t k = 0; k < g.node_count(); ++k)
  {
    const Mat2& e = s.E[k];
    if (std::abs(e(0, 1) - e(1, 0)) > 1e-12 * std::max(1.0, e.cwiseAbs().maxCoeff()))
      throw NumericalError("E is not symmetric at " + describe_node(g, k));
    const Mat2 a = geo.A[k] + 2.0 * e;
    if (!(a(0, 0) > 0.0 && a.determinant() > 0.0))
      throw NumericalError("A + 2E is not positive definite at " + describe_node(g, k));
    if (!(std::abs(s.del[k] + 1.0) > director_floor))
    {
      std::ostringstream os;
      os << "Delta + 1 = " << s.del[k] + 1.0 << " is singular at " << describe_node(g, k);
      throw NumericalError(os.str());
    }
  }
}

Mat3 ShellMetric::at(std::size_t k, double z) const
{
  Mat3 g;
  g.topLeftCorner<2, 2>() = a[k] + z * P[k] + z * z * Q[k];
  const Vec2 c = Del[k] + z * U[k];
  g.topRightCorner<2, 1>() = c;
  g.bottomLeftCorner<1, 2>() = c.transpose();
  g(2, 2) = V[k];
  return g;
}

Mat3 ShellMetric::dzeta_at(std::size_t k, double z) const
{
  Mat3 g;
  g.topLeftCorner<2, 2>() = P[k] + 2.0 * z * Q[k];
  g.topRightCorner<2, 1>() = U[k];
  g.bottomLeftCorner<1, 2>() = U[k].transpose();
  g(2, 2) = 0.0;
  return g;
}

Mat3 ShellMetric::dzeta2_at(std::size_t k) const
{
  Mat3 g = Mat3::Zero();
  g.topLeftCorner<2, 2>() = 2.0 * Q[k];
  return g;
}

void validate_metric(const ShellMetric& m)
{
  const ParamGrid& g = m.grid();
  for (std::size_t k = 0; k < g.node_count(); ++k)
  {
    if (!(m.V[k] > 0.0)) throw NumericalError("g_33 is not positive at " + describe_node(g, k));
    for (double z : {-m.h, 0.0, m.h})
    {
      Eigen::LLT<Mat3> llt(m.at(k, z));
      if (llt.info() != Eigen::Success)
      {
        std::ostringstream os;
        os << "shell metric is not positive definite at " << describe_node(g, k) << ", zeta = " << z;
        throw NumericalError(os.str());
      }
    }
  }
}

ShellMetric build_metric(const SurfaceGeometry& geo, const StrainSet& s, double half_thickness)
{
  if (!(half_thickness > 0.0)) throw Error("half thickness must be positive");
  validate_strains(geo, s);
  Mat2Field a = zip([](const Mat2& A, const Mat2& E) -> Mat2 { return A + 2.0 * E; }, geo.A, s.E);
  const Mat2Field ainv = invert2(a);
  const Mat2Field X = zip([](const Mat2& L, const Mat2& B) -> Mat2 { return L - B; }, s.Lam, geo.B);
  Mat2Field P = zip([](const Mat2& L, const Mat2& B) -> Mat2 { return (L + L.transpose()) - 2.0 * B; }, s.Lam, geo.B);
  Mat2Field Q = zip([](const Mat2& q, const Vec2& l) -> Mat2 { return q + l * l.transpose(); },
                    quadratic_contraction(ainv, X), s.lam);
  Vec2Field U = zip([](const Mat2& ai, const Mat2& x, const Vec2& D, const Vec2& l,
                       double d) -> Vec2 { return x.transpose() * (ai * D) + l * (d + 1.0); },
                    ainv, X, s.Del, s.lam, s.del);
  ScalarField V = zip([](const Mat2& ai, const Vec2& D, double d) { return D.dot(ai * D) + (d + 1.0) * (d + 1.0); }, ainv,
                      s.Del, s.del);
  ShellMetric m{std::move(a), std::move(P), std::move(Q), s.Del, std::move(U), std::move(V), half_thickness};
  validate_metric(m);
  return m;
}

ShellMetric ambient_metric(const SurfaceGeometry& geo, double half_thickness)
{
  return build_metric(geo, StrainSet::zero(geo.grid()), half_thickness);
}

Mat3Field metric_eval(const ShellMetric& m, double zeta)
{
  if (std::abs(zeta) > m.h) throw Error("zeta outside [-h, h]");
  return Mat3Field::generate(m.grid(), [&](int i, int j) { return m.at(m.grid().node(i, j), zeta); });
}

Mat3Field metric_dzeta(const ShellMetric& m, double zeta)
{
  if (std::abs(zeta) > m.h) throw Error("zeta outside [-h, h]");
  return Mat3Field::generate(m.grid(), [&](int i, int j) { return m.dzeta_at(m.grid().node(i, j), zeta); });
}

} // namespace dshell

#include "dshell/surface.hpp"

#include <sstream>

#include <Eigen/LU>

namespace dshell
{

SurfaceChart SurfaceChart::from_exprs(const Expr& x, const Expr& y, const Expr& z, const ParamGrid& grid)
{
  return {[x, y, z](double t1, double t2) { return Vec3(x.eval(t1, t2), y.eval(t1, t2), z.eval(t1, t2)); }, grid};
}

VecField SurfaceChart::sample() const
{
  return VecField::generate(grid, [&](int i, int j) { return R(grid.theta1(i), grid.theta2(j)); });
}

Mat2Field SurfaceGeometry::B_mixed() const
{
  return zip([](const Mat2& ai, const Mat2& b) -> Mat2 { return ai * b; }, Ainv, B);
}

VecField SurfaceGeometry::dual(int alpha) const
{
  return zip([alpha](const Mat2& ai, const Vec3& a1, const Vec3& a2) -> Vec3 { return ai(alpha, 0) * a1 + ai(alpha, 1) * a2; },
             Ainv, A1, A2);
}

SurfaceGeometry surface_from_positions(const VecField& r)
{
  const ParamGrid& g = r.grid();
  VecField a1 = partial(r, 1);
  VecField a2 = partial(r, 2);
  for (std::size_t k = 0; k < g.node_count(); ++k)
  {
    const double area = a1[k].cross(a2[k]).norm();
    if (!(area > regularity_floor))
    {
      std::ostringstream os;
      os << "degenerate surface frame at " << describe_node(g, k) << ", |A1 x A2| = " << area;
      throw NumericalError(os.str());
    }
  }
  VecField n = zip([](const Vec3& u, const Vec3& v) -> Vec3 { return u.cross(v).normalized(); }, a1, a2);
  Mat2Field A = zip(
      [](const Vec3& u, const Vec3& v) -> Mat2 {
        Mat2 m;
        m << u.dot(u), u.dot(v), v.dot(u), v.dot(v);
        return m;
      },
      a1, a2);
  Mat2Field Ainv = invert2(A);
  const VecField n1 = partial(n, 1);
  const VecField n2 = partial(n, 2);
  Mat2Field B = zip(
      [](const Vec3& u, const Vec3& v, const Vec3& dn1, const Vec3& dn2) -> Mat2 {
        const double b12 = -dn2.dot(u);
        const double b21 = -dn1.dot(v);
        const double off = 0.5 * (b12 + b21);
        Mat2 m;
        m << -dn1.dot(u), off, off, -dn2.dot(v);
        return m;
      },
      a1, a2, n1, n2);
  Mat2Field C = quadratic_contraction(Ainv, B);
  return {r, std::move(a1), std::move(a2), std::move(n), std::move(A), std::move(Ainv), std::move(B), std::move(C)};
}

SurfaceGeometry fundamental_forms(const SurfaceChart& chart) { return surface_from_positions(chart.sample()); }

Mat2Field quadratic_contraction(const Mat2Field& ainv, const Mat2Field& x)
{
  return zip([](const Mat2& ai, const Mat2& m) -> Mat2 { const Mat2 q = m.transpose() * ai * m;
    return 0.5 * (q + q.transpose()); }, ainv, x);
}

SurfaceChristoffels surface_christoffels(const Mat2Field& a)
{
  const Mat2Field ainv = invert2(a);
  const Mat2Field da[2] = {partial(a, 1), partial(a, 2)};
  const ParamGrid& g = a.grid();
  Tensor3Field2 lower = Tensor3Field2::generate(g, [&](int i, int j) {
    Tensor3<2> s;
    for (int al = 0; al < 2; ++al)
      for (int be = 0; be < 2; ++be)
        for (int mu = 0; mu < 2; ++mu)
          s(al, be, mu) = 0.5 * (da[be](i, j)(al, mu) + da[al](i, j)(be, mu) - da[mu](i, j)(al, be));
    return s;
  });
  Tensor3Field2 upper = zip(
      [](const Mat2& ai, const Tensor3<2>& lo) {
        Tensor3<2> s;
        for (int sg = 0; sg < 2; ++sg)
          for (int al = 0; al < 2; ++al)
            for (int be = 0; be < 2; ++be)
              s(sg, al, be) = ai(sg, 0) * lo(al, be, 0) + ai(sg, 1) * lo(al, be, 1);
        return s;
      },
      ainv, lower);
  return {std::move(lower), std::move(upper)};
}

ScalarField riemann2d(const Mat2Field& a)
{
  const SurfaceChristoffels s = surface_christoffels(a);
  const Tensor3Field2 d1 = partial(s.lower, 1);
  const Tensor3Field2 d2 = partial(s.lower, 2);
  return ScalarField::generate(a.grid(), [&](int i, int j) {
    const Tensor3<2>& lo = s.lower(i, j);
    const Tensor3<2>& up = s.upper(i, j);
    double q = 0.0;
    for (int mu = 0; mu < 2; ++mu) q += up(mu, 1, 0) * lo(1, 0, mu) - up(mu, 1, 1) * lo(0, 0, mu);
    return d1(i, j)(1, 1, 0) - d2(i, j)(1, 0, 0) + q;
  });
}

Mat2Field covariant_derivative(const Vec2Field& v, const SurfaceChristoffels& s)
{
  const Vec2Field dv[2] = {partial(v, 1), partial(v, 2)};
  return Mat2Field::generate(v.grid(), [&](int i, int j) {
    const Tensor3<2>& up = s.upper(i, j);
    const Vec2& x = v(i, j);
    Mat2 out;
    for (int al = 0; al < 2; ++al)
      for (int be = 0; be < 2; ++be) out(al, be) = dv[be](i, j)(al) - up(0, al, be) * x(0) - up(1, al, be) * x(1);
    return out;
  });
}

Tensor3Field2 covariant_derivative(const Mat2Field& t, const SurfaceChristoffels& s)
{
  const Mat2Field dt[2] = {partial(t, 1), partial(t, 2)};
  return Tensor3Field2::generate(t.grid(), [&](int i, int j) {
    const Tensor3<2>& up = s.upper(i, j);
    const Mat2& x = t(i, j);
    Tensor3<2> out;
    for (int al = 0; al < 2; ++al)
      for (int be = 0; be < 2; ++be)
        for (int ga = 0; ga < 2; ++ga)
        {
          double v = dt[ga](i, j)(al, be);
          for (int sg = 0; sg < 2; ++sg) v -= up(sg, al, ga) * x(sg, be) + up(sg, be, ga) * x(al, sg);
          out(al, be, ga) = v;
        }
    return out;
  });
}

ScalarField component(const Mat2Field& m, int r, int c)
{
  return m.map([r, c](const Mat2& x) { return x(r, c); });
}

ScalarField component(const Vec2Field& v, int k)
{
  return v.map([k](const Vec2& x) { return x(k); });
}

} // namespace dshell

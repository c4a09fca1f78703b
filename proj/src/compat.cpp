#include "dshell/compat.hpp"

#include <sstream>
#include <vector>

#include <Eigen/SVD>

namespace dshell
{

namespace
{

constexpr double eps2(int a, int b)
{
  return a == b ? 0.0 : (a == 0 ? 1.0 : -1.0);
}

void require_director(const ScalarField& del, const char* what)
{
  for (std::size_t k = 0; k < del.grid().node_count(); ++k)
    if (!(std::abs(del[k] + 1.0) > director_floor))
      throw NumericalError(std::string(what) + ": singular director, |Delta + 1| = " + std::to_string(std::abs(del[k] + 1.0)) +
                           " at " + describe_node(del.grid(), k));
}

Mat2Field deformed_metric(const SurfaceGeometry& geo, const StrainSet& s)
{
  return zip([](const Mat2& A, const Mat2& E) -> Mat2 { return A + 2.0 * E; }, geo.A, s.E);
}

Vec2Field dot_frame(const VecField& v, const VecField& a1, const VecField& a2)
{
  return zip([](const Vec3& x, const Vec3& p, const Vec3& q) { return Vec2(x.dot(p), x.dot(q)); }, v, a1, a2);
}

} // namespace

DirectedDeformation DirectedDeformation::from_exprs(const std::array<Expr, 3>& r, const std::array<Expr, 3>& d,
                                                    const ParamGrid& grid)
{
  auto sample = [&](const std::array<Expr, 3>& e) {
    return VecField::generate(grid, [&](int i, int j) {
      const double t1 = grid.theta1(i), t2 = grid.theta2(j);
      return Vec3(e[0].eval(t1, t2), e[1].eval(t1, t2), e[2].eval(t1, t2));
    });
  };
  return {sample(r), sample(d)};
}

StrainSet strain_measures(const SurfaceGeometry& geo, const DirectedDeformation& def)
{
  if (!(def.grid() == geo.grid())) throw Error("strain_measures: deformation and surface use different grids");
  require_finite(def.r, "deformed surface");
  require_finite(def.d, "director");
  const ParamGrid& grid = geo.grid();
  const VecField a1 = partial(def.r, 1);
  const VecField a2 = partial(def.r, 2);
  for (std::size_t k = 0; k < grid.node_count(); ++k)
    if (!(a1[k].cross(a2[k]).norm() > regularity_floor))
      throw NumericalError("strain_measures: degenerate deformed surface at " + describe_node(grid, k));
  const VecField n = zip([](const Vec3& p, const Vec3& q) -> Vec3 { return p.cross(q).normalized(); }, a1, a2);
  const VecField d1 = partial(def.d, 1);
  const VecField d2 = partial(def.d, 2);
  StrainSet s = StrainSet::zero(grid);
  s.E = Mat2Field::generate(grid, [&](int i, int j) {
    const Vec3 t[2] = {a1(i, j), a2(i, j)};
    Mat2 e;
    for (int p = 0; p < 2; ++p)
      for (int q = 0; q < 2; ++q) e(p, q) = 0.5 * (t[p].dot(t[q]) - geo.A(i, j)(p, q));
    return e;
  });
  s.Del = dot_frame(def.d, a1, a2);
  s.del = zip([](const Vec3& d, const Vec3& nn) { return d.dot(nn) - 1.0; }, def.d, n);
  // Lambda_ab = d_{,b} . a_a + B_ab, Lambda_a = d_{,a} . n
  s.Lam = Mat2Field::generate(grid, [&](int i, int j) {
    const Vec3 t[2] = {a1(i, j), a2(i, j)};
    const Vec3 dd[2] = {d1(i, j), d2(i, j)};
    Mat2 m;
    for (int p = 0; p < 2; ++p)
      for (int q = 0; q < 2; ++q) m(p, q) = dd[q].dot(t[p]) + geo.B(i, j)(p, q);
    return m;
  });
  s.lam = zip([](const Vec3& p, const Vec3& q, const Vec3& nn) { return Vec2(p.dot(nn), q.dot(nn)); }, d1, d2, n);
  return s;
}

StrainSet strain_measures_intrinsic(const SurfaceGeometry& geo, const DirectedDeformation& def)
{
  if (!(def.grid() == geo.grid())) throw Error("strain_measures: deformation and surface use different grids");
  const SurfaceGeometry dg = surface_from_positions(def.r);
  const ParamGrid& grid = geo.grid();
  const Vec2Field dcov = dot_frame(def.d, dg.A1, dg.A2);
  const ScalarField dn = zip([](const Vec3& d, const Vec3& n) { return d.dot(n); }, def.d, dg.N);
  const SurfaceChristoffels sch = surface_christoffels(dg.A);
  const Mat2Field ddcov = covariant_derivative(dcov, sch);
  const Vec2Field ddn = zip([](double x, double y) { return Vec2(x, y); }, partial(dn, 1), partial(dn, 2));
  const Mat2Field bm = dg.B_mixed();
  StrainSet s = StrainSet::zero(grid);
  s.E = zip([](const Mat2& a, const Mat2& A) -> Mat2 { return 0.5 * (a - A); }, dg.A, geo.A);
  s.Del = dcov;
  s.del = dn.map([](double x) { return x - 1.0; });
  s.Lam = zip([](const Mat2& B, const Mat2& dd, double d, const Mat2& b) -> Mat2 { return B + dd - d * b; }, geo.B, ddcov, dn,
              dg.B);
  s.lam = zip([](const Vec2& g, const Vec2& dc, const Mat2& b) -> Vec2 { return g + b.transpose() * dc; }, ddn, dcov, bm);
  return s;
}

Mat2Field second_form_from_strains(const SurfaceGeometry& geo, const StrainSet& s)
{
  require_director(s.del, "second_form_from_strains");
  const Mat2Field a = deformed_metric(geo, s);
  const SurfaceChristoffels sch = surface_christoffels(a);
  const Mat2Field dD = covariant_derivative(s.Del, sch);
  return zip([](const Mat2& L, const Mat2& B, const Mat2& dd, double del) -> Mat2 { return -(L - B - dd) / (del + 1.0); },
             s.Lam, geo.B, dD, s.del);
}

IncompatibilitySet IncompatibilitySet::zero(const ParamGrid& grid)
{
  return {ScalarField::zero(grid), ScalarField::zero(grid), Vec2Field::zero(grid), Vec2Field::zero(grid)};
}

double IncompatibilitySet::max_norm() const { return std::max({J.max_norm(), K.max_norm(), L.max_norm(), I.max_norm()}); }

IncompatibilitySet compatibility_residuals(const SurfaceGeometry& geo, const StrainSet& s)
{
  validate_strains(geo, s);
  const Mat2Field b = second_form_from_strains(geo, s);
  const Mat2Field bs = symmetric_part(b);
  const Mat2Field a = deformed_metric(geo, s);
  const Mat2Field ainv = invert2(a);
  const SurfaceChristoffels sch = surface_christoffels(a);
  const ScalarField S = riemann2d(a);
  const Tensor3Field2 db = covariant_derivative(bs, sch);
  const Mat2Field dD = covariant_derivative(s.Del, sch);
  const ScalarField d1 = partial(s.del, 1);
  const ScalarField d2 = partial(s.del, 2);

  IncompatibilitySet out = IncompatibilitySet::zero(geo.grid());
  out.J = b.map([](const Mat2& m) { return m(0, 1) - m(1, 0); });
  out.K = zip([](double s1212, const Mat2& m) { return s1212 - m(0, 0) * m(1, 1) + m(0, 1) * m(0, 1); }, S, bs);
  out.L = db.map([](const Tensor3<2>& t) { return Vec2(t(0, 0, 1) - t(0, 1, 0), t(1, 0, 1) - t(1, 1, 0)); });
  out.I = Vec2Field::generate(geo.grid(), [&](int i, int j) {
    const Mat2 X = 0.5 * (s.Lam(i, j) + s.Lam(i, j).transpose()) - geo.B(i, j) - 0.5 * (dD(i, j) + dD(i, j).transpose());
    const Vec2 w = ainv(i, j) * s.Del(i, j); // w^g = a^{ag} Delta_a
    const Vec2 grad(d1(i, j), d2(i, j));
    return Vec2(s.lam(i, j) - grad + X.transpose() * w / (s.del(i, j) + 1.0));
  });
  return out;
}

IVariant parse_variant(const std::string& name)
{
  if (name == "rel3") return IVariant::rel3;
  if (name == "remark") return IVariant::remark;
  throw Error("unknown variant '" + name + "', expected rel3 or remark");
}

std::string to_string(IVariant v) { return v == IVariant::rel3 ? "rel3" : "remark"; }

Mat2Field kr3s3_lhs(const SurfaceGeometry& geo, const StrainSet& s, const ScalarField& J, const Vec2Field& I, IVariant v)
{
  const Mat2Field b = second_form_from_strains(geo, s);
  const Mat2Field a = deformed_metric(geo, s);
  const Mat2Field ainv = invert2(a);
  const Mat2Field dI = covariant_derivative(I, surface_christoffels(a));
  const double xfac = v == IVariant::rel3 ? 0.25 : 0.5;
  return Mat2Field::generate(geo.grid(), [&](int n1, int n2) {
    const Mat2& bb = b(n1, n2);
    const Mat2 bs = 0.5 * (bb + bb.transpose());
    const Mat2& ai = ainv(n1, n2);
    const Vec2& D = s.Del(n1, n2);
    const double dp1 = s.del(n1, n2) + 1.0;
    const Vec2& lam = s.lam(n1, n2);
    const Vec2& In = I(n1, n2);
    const double Jn = J(n1, n2);
    const Mat2 X = s.Lam(n1, n2) - geo.B(n1, n2);
    const Vec2 w = ai * D;
    const Vec2 aD = ai * D;
    const Mat2 M = ai + aD * aD.transpose() / (dp1 * dp1);
    Mat2 out;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
      {
        double v1 = dp1 * 0.5 * (dI(n1, n2)(r, c) + dI(n1, n2)(c, r));
        v1 -= 0.5 * (lam(r) * In(c) + lam(c) * In(r));
        double brace = 0.0;
        for (int be = 0; be < 2; ++be)
        {
          const double term = 0.5 * (bs(be, r) * In(c) + bs(be, c) * In(r)) +
                              xfac * (eps2(be, r) * In(c) + eps2(be, c) * In(r)) * Jn - bs(r, c) * In(be);
          brace += w(be) * term;
        }
        v1 -= brace;
        double quad = 0.0;
        for (int al = 0; al < 2; ++al)
          for (int be = 0; be < 2; ++be)
          {
            const double last = v == IVariant::rel3 ? bb(be, c) * X(al, r) : eps2(be, c) * X(al, r);
            quad += M(al, be) * (dp1 * Jn * eps2(al, r) * eps2(be, c) + eps2(al, r) * X(be, c) + last);
          }
        out(r, c) = v1 + dp1 * Jn * quad;
      }
    return out;
  });
}

CurvatureIncompatibility incompatibility_from_curvature(const Curvature3& kc, const SurfaceGeometry& geo, const StrainSet& s,
                                                        IVariant v, const IncompatibilitySet* candidate)
{
  require_director(s.del, "incompatibility_from_curvature");
  const ParamGrid& grid = geo.grid();
  const Mat2Field ainv = invert2(deformed_metric(geo, s));
  IncompatibilitySet out = IncompatibilitySet::zero(grid);
  out.K = kc.K1212();
  // a^{2b} Delta_b K + (Delta+1) L_1 = K_1213, -a^{1b} Delta_b K + (Delta+1) L_2 = K_1223
  out.L = Vec2Field::generate(grid, [&](int i, int j) {
    const Vec2 w = ainv(i, j) * s.Del(i, j);
    const double K = kc.K1212()(i, j);
    const double dp1 = s.del(i, j) + 1.0;
    return Vec2((kc.K1213()(i, j) - w(1) * K) / dp1, (kc.K1223()(i, j) + w(0) * K) / dp1);
  });
  if (candidate)
  {
    out.J = candidate->J;
    out.I = candidate->I;
  }
  const Mat2Field lhs = kr3s3_lhs(geo, s, out.J, out.I, v);
  Mat2Field triple = Mat2Field::generate(grid, [&](int i, int j) {
    Mat2 t;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) t(r, c) = kc.Kr3s3(r, c)(i, j) - lhs(i, j)(r, c);
    return t;
  });
  return {std::move(out), std::move(triple)};
}

Curvature3 shell_curvature(const SurfaceGeometry& geo, const StrainSet& s, double half_thickness)
{
  const ShellMetric m = build_metric(geo, s, half_thickness);
  return riemann_at_midsurface(levi_civita(m), m);
}

Curvature3 torsion_curvature_rhs(const MetricJet& jet, const TorsionSet& t)
{
  const Tensor4Field low = lower_first(contortion_curvature(t, jet), jet.g);
  auto pick = [&](int k) {
    const auto [a, b, c, d] = Curvature3::slots[k];
    return low.map([a = a, b = b, c = c, d = d](const Tensor4<3>& x) { return -x(a, b, c, d); });
  };
  return Curvature3{{pick(0), pick(1), pick(2), pick(3), pick(4), pick(5)}};
}

CurvatureIncompatibility incompatibility_rhs_from_torsion(const SurfaceGeometry& geo, const StrainSet& s, const TorsionSet& t,
                                                          IVariant v, double half_thickness,
                                                          const IncompatibilitySet* candidate)
{
  if (!(t.grid() == geo.grid())) throw Error("incompatibility_rhs_from_torsion: torsion and surface use different grids");
  const MetricJet jet = metric_jet(build_metric(geo, s, half_thickness));
  return incompatibility_from_curvature(torsion_curvature_rhs(jet, t), geo, s, v, candidate);
}

namespace
{

template <class T>
T midpoint_value(const std::vector<T>& m, int k)
{
  const int n = static_cast<int>(m.size());
  if (k >= 1 && k + 2 < n) return (-m[k - 1] + 9.0 * m[k] + 9.0 * m[k + 1] - m[k + 2]) / 16.0;
  if (k == 0) return (5.0 * m[0] + 15.0 * m[1] - 5.0 * m[2] + m[3]) / 16.0;
  return (m[k - 2] - 5.0 * m[k - 1] + 15.0 * m[k] + 5.0 * m[k + 1]) / 16.0;
}

// Frame rows (a_1, a_2, n) obey F' = W F along a line; r' = row `dir` of F.
struct LineState
{
  std::vector<Mat3> F;
  std::vector<Vec3> r;
};

LineState integrate_frame_line(const std::vector<Mat3>& W, double h, int s, const Mat3& F0, const Vec3& r0, int dir)
{
  const int n = static_cast<int>(W.size());
  LineState out{std::vector<Mat3>(n), std::vector<Vec3>(n)};
  out.F[s] = F0;
  auto step = [&](int from, int to, int mid_k) {
    const double b = to > from ? h : -h;
    const Mat3 Wm = midpoint_value(W, mid_k);
    const Mat3& F = out.F[from];
    const Mat3 k1 = W[from] * F;
    const Mat3 k2 = Wm * (F + 0.5 * b * k1);
    const Mat3 k3 = Wm * (F + 0.5 * b * k2);
    const Mat3 k4 = W[to] * (F + b * k3);
    out.F[to] = F + b / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };
  for (int k = s; k + 1 < n; ++k) step(k, k + 1, k);
  for (int k = s; k > 0; --k) step(k, k - 1, k - 1);
  // Simpson's rule on the tangent with cubic midpoint values
  std::vector<Vec3> t(n);
  for (int k = 0; k < n; ++k) t[k] = out.F[k].row(dir).transpose();
  out.r[s] = r0;
  for (int k = s; k + 1 < n; ++k) out.r[k + 1] = out.r[k] + h / 6.0 * (t[k] + 4.0 * midpoint_value(t, k) + t[k + 1]);
  for (int k = s; k > 0; --k) out.r[k - 1] = out.r[k] - h / 6.0 * (t[k - 1] + 4.0 * midpoint_value(t, k - 1) + t[k]);
  return out;
}

} // namespace

DirectedDeformation reconstruct_surface(const SurfaceGeometry& geo, const StrainSet& s, const ReconstructionOptions& opt)
{
  const ParamGrid& grid = geo.grid();
  if (opt.seed_i < 0 || opt.seed_i >= grid.n1() || opt.seed_j < 0 || opt.seed_j >= grid.n2())
    throw Error("reconstruct_surface: seed node outside the grid");
  const double hmax = std::max(grid.h1(), grid.h2());
  const double auto_tol = 1e-6 + opt.residual_c * hmax * hmax;
  const double rtol = opt.residual_tol >= 0.0 ? opt.residual_tol : auto_tol;
  const double dtol = opt.drift_tol >= 0.0 ? opt.drift_tol : auto_tol;

  const IncompatibilitySet res = compatibility_residuals(geo, s);
  const double parts[4] = {res.J.max_norm(), res.K.max_norm(), res.L.max_norm(), res.I.max_norm()};
  if (std::max({parts[0], parts[1], parts[2], parts[3]}) > rtol)
  {
    std::ostringstream os;
    os << "reconstruct_surface: strains are not compatible (max |J| = " << parts[0] << ", |K| = " << parts[1]
       << ", |L| = " << parts[2] << ", |I| = " << parts[3] << ", threshold " << rtol << ")";
    throw NumericalError(os.str());
  }

  const Mat2Field a = deformed_metric(geo, s);
  const Mat2Field ainv = invert2(a);
  const Mat2Field b = symmetric_part(second_form_from_strains(geo, s));
  const SurfaceChristoffels sch = surface_christoffels(a);
  // W_g rows: a_{a,g} = s^m_{ag} a_m + b_ag n, n_{,g} = -b^m_g a_m
  auto W = [&](int i, int j, int g) {
    Mat3 w = Mat3::Zero();
    const Mat2 bm = ainv(i, j) * b(i, j);
    for (int al = 0; al < 2; ++al)
    {
      for (int m = 0; m < 2; ++m) w(al, m) = sch.upper(i, j)(m, al, g);
      w(al, 2) = b(i, j)(al, g);
      w(2, al) = -bm(al, g);
    }
    return w;
  };
  // seed: orthonormal reference triad with a_1 along A_1
  const int si = opt.seed_i, sj = opt.seed_j;
  const Vec3 e1 = geo.A1(si, sj).normalized();
  const Vec3 e3 = geo.N(si, sj);
  const Vec3 e2 = e3.cross(e1);
  const Mat2& as = a(si, sj);
  Mat3 F0;
  const double a11 = std::sqrt(as(0, 0));
  F0.row(0) = (a11 * e1).transpose();
  F0.row(1) = (as(0, 1) / a11 * e1 + std::sqrt(as(1, 1) - as(0, 1) * as(0, 1) / as(0, 0)) * e2).transpose();
  F0.row(2) = e3.transpose();

  std::vector<Mat3> Wrow(grid.n1());
  for (int i = 0; i < grid.n1(); ++i) Wrow[i] = W(i, sj, 0);
  const LineState base = integrate_frame_line(Wrow, grid.h1(), si, F0, geo.R(si, sj), 0);
  std::vector<Mat3> F(grid.node_count());
  std::vector<Vec3> r(grid.node_count());
  detail::parallel_for(static_cast<std::size_t>(grid.n1()), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t l = lo; l < hi; ++l)
    {
      const int i = static_cast<int>(l);
      std::vector<Mat3> Wc(grid.n2());
      for (int j = 0; j < grid.n2(); ++j) Wc[j] = W(i, j, 1);
      const LineState col = integrate_frame_line(Wc, grid.h2(), sj, base.F[i], base.r[i], 1);
      for (int j = 0; j < grid.n2(); ++j)
      {
        F[grid.node(i, j)] = col.F[j];
        r[grid.node(i, j)] = col.r[j];
      }
    }
  });

  double drift = 0.0;
  std::size_t worst = 0;
  for (std::size_t k = 0; k < grid.node_count(); ++k)
  {
    const Mat3& f = F[k];
    const Mat3 gram = f * f.transpose();
    Mat3 target = Mat3::Identity();
    target.topLeftCorner<2, 2>() = a[k];
    const double e = (gram - target).cwiseAbs().maxCoeff();
    if (e > drift)
    {
      drift = e;
      worst = k;
    }
  }
  if (drift > dtol)
  {
    std::ostringstream os;
    os << "reconstruct_surface: frame drift " << drift << " at " << describe_node(grid, worst) << " exceeds " << dtol;
    throw NumericalError(os.str());
  }

  VecField rf = VecField::generate(grid, [&](int i, int j) { return r[grid.node(i, j)]; });
  VecField df = VecField::generate(grid, [&](int i, int j) {
    const Mat3& f = F[grid.node(i, j)];
    const Vec2 up = ainv(i, j) * s.Del(i, j);
    return Vec3(up(0) * f.row(0).transpose() + up(1) * f.row(1).transpose() + (s.del(i, j) + 1.0) * f.row(2).transpose());
  });
  return {std::move(rf), std::move(df)};
}

namespace
{

std::pair<Mat3, Vec3> kabsch(const VecField& p, const VecField& q)
{
  if (!(p.grid() == q.grid())) throw Error("rigid fit: point sets use different grids");
  const std::size_t n = p.grid().node_count();
  Vec3 cp = Vec3::Zero(), cq = Vec3::Zero();
  for (std::size_t k = 0; k < n; ++k)
  {
    cp += p[k];
    cq += q[k];
  }
  cp /= static_cast<double>(n);
  cq /= static_cast<double>(n);
  Mat3 Hm = Mat3::Zero();
  for (std::size_t k = 0; k < n; ++k) Hm += (p[k] - cp) * (q[k] - cq).transpose();
  Eigen::JacobiSVD<Mat3> svd(Hm, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  D(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Mat3 Rm = svd.matrixV() * D * svd.matrixU().transpose();
  return {Rm, Vec3(cq - Rm * cp)};
}

} // namespace

double rigid_fit_rms(const VecField& p, const VecField& q)
{
  const auto [Rm, t] = kabsch(p, q);
  double s = 0.0;
  for (std::size_t k = 0; k < p.grid().node_count(); ++k) s += (Rm * p[k] + t - q[k]).squaredNorm();
  return std::sqrt(s / static_cast<double>(p.grid().node_count()));
}

double rigid_fit_max(const VecField& p, const VecField& q)
{
  const auto [Rm, t] = kabsch(p, q);
  double m = 0.0;
  for (std::size_t k = 0; k < p.grid().node_count(); ++k) m = std::max(m, (Rm * p[k] + t - q[k]).norm());
  return m;
}

} // namespace dshell

#include "dshell/defects.hpp"

#include <sstream>
#include <vector>

namespace dshell
{

void validate_uniformity(const UniformityField& u)
{
  require_finite(u.H, "uniformity field");
  require_finite(u.Hdz, "uniformity field zeta-derivative");
  require_finite(u.Hdzz, "uniformity field second zeta-derivative");
  for (std::size_t k = 0; k < u.grid().node_count(); ++k)
  {
    const double det = u.H[k].determinant();
    if (!(det > uniformity_det_floor))
    {
      std::ostringstream os;
      os << "uniformity field: det H = " << det << " at " << describe_node(u.grid(), k);
      throw NumericalError(os.str());
    }
  }
}

UniformityField uniformity_from_function(const ParamGrid& grid, const std::function<Mat3(double, double, double)>& H,
                                         const std::function<Mat3(double, double, double)>& dH)
{
  // steps balance truncation against cancellation for O(1) analytic data
  constexpr double d1 = 1e-3;
  constexpr double d2 = 5e-3;
  auto first = [](const std::function<Mat3(double, double, double)>& f, double t1, double t2, double d) -> Mat3 {
    return (-f(t1, t2, 2 * d) + 8.0 * f(t1, t2, d) - 8.0 * f(t1, t2, -d) + f(t1, t2, -2 * d)) / (12.0 * d);
  };
  auto at = [&](auto&& f) {
    return Mat3Field::generate(grid, [&](int i, int j) { return Mat3(f(grid.theta1(i), grid.theta2(j))); });
  };
  UniformityField u{at([&](double a, double b) { return H(a, b, 0.0); }), Mat3Field::zero(grid), Mat3Field::zero(grid),
                    UniformityField::Provenance::analytic};
  if (dH)
  {
    u.Hdz = at([&](double a, double b) { return dH(a, b, 0.0); });
    u.Hdzz = at([&](double a, double b) { return first(dH, a, b, d1); });
  }
  else
  {
    u.Hdz = at([&](double a, double b) { return first(H, a, b, d1); });
    u.Hdzz = at([&](double a, double b) -> Mat3 {
      return (-H(a, b, 2 * d2) + 16.0 * H(a, b, d2) - 30.0 * H(a, b, 0.0) + 16.0 * H(a, b, -d2) - H(a, b, -2 * d2)) /
             (12.0 * d2 * d2);
    });
  }
  validate_uniformity(u);
  return u;
}

UniformityField uniformity_from_exprs(const ParamGrid& grid, const std::array<Expr, 9>& H, const std::array<Expr, 9>* dH)
{
  auto wrap = [](const std::array<Expr, 9>& e) {
    return [e](double t1, double t2, double z) {
      Mat3 m;
      for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = e[k].eval(t1, t2, z);
      return m;
    };
  };
  if (dH) return uniformity_from_function(grid, wrap(H), wrap(*dH));
  return uniformity_from_function(grid, wrap(H));
}

Connection3 uniformity_connection(const UniformityField& u)
{
  validate_uniformity(u);
  const Mat3Field Hinv = invert3(u.H);
  const std::array<Mat3Field, 3> dH{partial(u.H, 1), partial(u.H, 2), u.Hdz};
  const std::array<Mat3Field, 3> dHdz{partial(u.Hdz, 1), partial(u.Hdz, 2), u.Hdzz};
  auto assemble = [](const Mat3& hinv, const std::array<Mat3, 3>& d) {
    Tensor3<3> L;
    for (int j = 0; j < 3; ++j)
    {
      const Mat3 m = hinv * d[j];
      for (int q = 0; q < 3; ++q)
        for (int i = 0; i < 3; ++i) L(q, i, j) = m(q, i);
    }
    return L;
  };
  Tensor3Field L = Tensor3Field::generate(u.grid(), [&](int i, int j) {
    return assemble(Hinv(i, j), {dH[0](i, j), dH[1](i, j), dH[2](i, j)});
  });
  Tensor3Field Ldz = Tensor3Field::generate(u.grid(), [&](int i, int j) {
    const Mat3& hi = Hinv(i, j);
    const Mat3 dhi = -hi * u.Hdz(i, j) * hi;
    return assemble(dhi, {dH[0](i, j), dH[1](i, j), dH[2](i, j)}) +
           assemble(hi, {dHdz[0](i, j), dHdz[1](i, j), dHdz[2](i, j)});
  });
  return {std::move(L), std::move(Ldz)};
}

namespace
{

Mat3 embed(const Mat2& m, double m33)
{
  Mat3 out = Mat3::Zero();
  out.topLeftCorner<2, 2>() = m;
  out(2, 2) = m33;
  return out;
}

} // namespace

MetricJet pulled_back_jet(const UniformityField& u, const SurfaceGeometry& geo)
{
  validate_uniformity(u);
  if (!(u.grid() == geo.grid())) throw Error("pulled_back_jet: uniformity field and surface use different grids");
  const ParamGrid& grid = u.grid();
  // ambient G_{ij} = diag(A - 2 zeta B + zeta^2 C, 1)
  Mat3Field g = Mat3Field::generate(grid, [&](int i, int j) -> Mat3 {
    const Mat3 Y = embed(geo.Ainv(i, j), 1.0);
    const Mat3& X = u.H(i, j);
    return X.transpose() * Y * X;
  });
  Mat3Field gdz = Mat3Field::generate(grid, [&](int i, int j) -> Mat3 {
    const Mat3 Y = embed(geo.Ainv(i, j), 1.0);
    const Mat3 Y1 = -Y * embed(-2.0 * geo.B(i, j), 0.0) * Y;
    const Mat3& X = u.H(i, j);
    const Mat3& X1 = u.Hdz(i, j);
    return X1.transpose() * Y * X + X.transpose() * Y1 * X + X.transpose() * Y * X1;
  });
  Mat3Field gdzz = Mat3Field::generate(grid, [&](int i, int j) -> Mat3 {
    const Mat3 Y = embed(geo.Ainv(i, j), 1.0);
    const Mat3 G1 = embed(-2.0 * geo.B(i, j), 0.0);
    const Mat3 G2 = embed(2.0 * geo.C(i, j), 0.0);
    const Mat3 Y1 = -Y * G1 * Y;
    const Mat3 Y2 = 2.0 * Y * G1 * Y * G1 * Y - Y * G2 * Y;
    const Mat3& X = u.H(i, j);
    const Mat3& X1 = u.Hdz(i, j);
    const Mat3& X2 = u.Hdzz(i, j);
    return X2.transpose() * Y * X + X.transpose() * Y * X2 + 2.0 * X1.transpose() * Y * X1 + X.transpose() * Y2 * X +
           2.0 * (X1.transpose() * Y1 * X + X.transpose() * Y1 * X1);
  });
  Mat3Field ginv = invert3(g);
  std::array<Mat3Field, 3> dg{partial(g, 1), partial(g, 2), gdz};
  std::array<Mat3Field, 3> dgdz{partial(gdz, 1), partial(gdz, 2), gdzz};
  return {std::move(g), std::move(ginv), std::move(dg), std::move(dgdz), std::move(gdz)};
}

CosseratBases cosserat_bases(const UniformityField& u, const SurfaceGeometry& geo)
{
  validate_uniformity(u);
  if (!(u.grid() == geo.grid())) throw Error("cosserat_bases: uniformity field and surface use different grids");
  const ParamGrid& grid = u.grid();
  const VecField dual0 = geo.dual(0);
  const VecField dual1 = geo.dual(1);
  const Mat2Field Bm = geo.B_mixed();
  // G^a(zeta) = A^a + zeta B^a_b A^b, G^3 = N
  auto basis = [&](int i, int j) {
    return std::array<Vec3, 3>{dual0(i, j), dual1(i, j), geo.N(i, j)};
  };
  auto basis_dz = [&](int i, int j) {
    const Mat2& b = Bm(i, j);
    return std::array<Vec3, 3>{b(0, 0) * dual0(i, j) + b(0, 1) * dual1(i, j), b(1, 0) * dual0(i, j) + b(1, 1) * dual1(i, j),
                               Vec3::Zero()};
  };
  auto column = [&](int col, bool dz) {
    return VecField::generate(grid, [&, col, dz](int i, int j) {
      const auto G = basis(i, j);
      const Mat3& H = dz ? u.Hdz(i, j) : u.H(i, j);
      Vec3 v = H(0, col) * G[0] + H(1, col) * G[1] + H(2, col) * G[2];
      if (dz)
      {
        const auto Gd = basis_dz(i, j);
        const Mat3& H0 = u.H(i, j);
        v += H0(0, col) * Gd[0] + H0(1, col) * Gd[1];
      }
      return v;
    });
  };
  CosseratBases b{{column(0, false), column(1, false)}, {column(0, true), column(1, true)}, column(2, false)};
  for (std::size_t k = 0; k < grid.node_count(); ++k)
  {
    const Vec3 n = b.a[0][k].cross(b.a[1][k]);
    if (!(n.norm() > bases_floor) || !(std::abs(b.d[k].dot(n)) > bases_floor))
      throw NumericalError("cosserat_bases: degenerate frame (a_1, a_2, d) at " + describe_node(grid, k));
  }
  return b;
}

StrainSet strains_from_bases(const CosseratBases& b, const SurfaceGeometry& geo)
{
  const ParamGrid& grid = geo.grid();
  const VecField n = zip([](const Vec3& a1, const Vec3& a2) -> Vec3 { return a1.cross(a2).normalized(); }, b.a[0], b.a[1]);
  StrainSet s = StrainSet::zero(grid);
  s.E = Mat2Field::generate(grid, [&](int i, int j) {
    Mat2 a;
    for (int p = 0; p < 2; ++p)
      for (int q = 0; q < 2; ++q) a(p, q) = b.a[p](i, j).dot(b.a[q](i, j));
    return Mat2(0.5 * (a - geo.A(i, j)));
  });
  // Lambda_ab = D_b . a_a - N_{,b} . A_a and -N_{,b} . A_a = B_ab
  s.Lam = Mat2Field::generate(grid, [&](int i, int j) {
    Mat2 m;
    for (int p = 0; p < 2; ++p)
      for (int q = 0; q < 2; ++q) m(p, q) = b.D[q](i, j).dot(b.a[p](i, j)) + geo.B(i, j)(p, q);
    return m;
  });
  s.lam = Vec2Field::generate(grid, [&](int i, int j) { return Vec2(b.D[0](i, j).dot(n(i, j)), b.D[1](i, j).dot(n(i, j))); });
  s.Del = Vec2Field::generate(grid, [&](int i, int j) { return Vec2(b.d(i, j).dot(b.a[0](i, j)), b.d(i, j).dot(b.a[1](i, j))); });
  s.del = ScalarField::generate(grid, [&](int i, int j) { return b.d(i, j).dot(n(i, j)) - 1.0; });
  return s;
}

ShellMetric pulled_back_metric(const UniformityField& u, const SurfaceGeometry& geo, double half_thickness)
{
  return build_metric(geo, strains_from_bases(cosserat_bases(u, geo), geo), half_thickness);
}

DefectSet DefectSet::zero(const ParamGrid& grid)
{
  return {Tensor3Field2::zero(grid), Mat2Field::zero(grid), Mat2Field::zero(grid), Vec2Field::zero(grid)};
}

double DefectSet::max_norm() const
{
  return std::max({Tmab.max_norm(), T3ab.max_norm(), Tma3.max_norm(), T3a3.max_norm()});
}

DefectSet inhomogeneity_measures(const UniformityField& u, const SurfaceGeometry& geo)
{
  const CosseratBases b = cosserat_bases(u, geo);
  const ParamGrid& grid = geo.grid();
  auto dots2 = [&](const std::array<VecField, 2>& v) {
    return Mat2Field::generate(grid, [&](int i, int j) {
      Mat2 m;
      for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q) m(p, q) = geo.tangent(p)(i, j).dot(v[q](i, j));
      return m;
    });
  };
  auto dotN = [&](const std::array<VecField, 2>& v) {
    return Vec2Field::generate(grid, [&](int i, int j) { return Vec2(geo.N(i, j).dot(v[0](i, j)), geo.N(i, j).dot(v[1](i, j))); });
  };
  const Mat2Field Hab = dots2(b.a);
  const Vec2Field H3a = dotN(b.a);
  const Mat2Field Fab = dots2(b.D);
  const Vec2Field F3b = dotN(b.D);
  const Vec2Field Fa3 = Vec2Field::generate(grid, [&](int i, int j) { return Vec2(geo.A1(i, j).dot(b.d(i, j)), geo.A2(i, j).dot(b.d(i, j))); });
  const ScalarField F33 = zip([](const Vec3& n, const Vec3& d) { return n.dot(d); }, geo.N, b.d);
  const std::array<Mat2Field, 2> dHab{partial(Hab, 1), partial(Hab, 2)};
  const std::array<Vec2Field, 2> dH3a{partial(H3a, 1), partial(H3a, 2)};
  const std::array<Vec2Field, 2> dFa3{partial(Fa3, 1), partial(Fa3, 2)};
  const std::array<ScalarField, 2> dF33{partial(F33, 1), partial(F33, 2)};
  const Mat2Field Bm = geo.B_mixed();

  DefectSet out = DefectSet::zero(grid);
  out.Tmab = Tensor3Field2::generate(grid, [&](int i, int j) {
    Tensor3<2> t;
    for (int m = 0; m < 2; ++m)
      for (int a = 0; a < 2; ++a)
        for (int c = 0; c < 2; ++c) t(m, a, c) = 0.5 * (dHab[c](i, j)(m, a) - dHab[a](i, j)(m, c));
    return t;
  });
  out.T3ab = Mat2Field::generate(grid, [&](int i, int j) {
    Mat2 t;
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c) t(a, c) = 0.5 * (dH3a[c](i, j)(a) - dH3a[a](i, j)(c));
    return t;
  });
  // H_{m a,3} = F_{m a} - B^n_m H_{n a}, H_{m 3,a} = F_{m 3,a}
  out.Tma3 = Mat2Field::generate(grid, [&](int i, int j) {
    Mat2 t;
    for (int m = 0; m < 2; ++m)
      for (int a = 0; a < 2; ++a)
      {
        double bh = 0.0;
        for (int n = 0; n < 2; ++n) bh += Bm(i, j)(n, m) * Hab(i, j)(n, a);
        t(m, a) = 0.5 * (Fab(i, j)(m, a) - bh - dFa3[a](i, j)(m));
      }
    return t;
  });
  out.T3a3 = Vec2Field::generate(grid, [&](int i, int j) {
    return Vec2(0.5 * (F3b(i, j)(0) - dF33[0](i, j)), 0.5 * (F3b(i, j)(1) - dF33[1](i, j)));
  });
  return out;
}

TorsionSet torsion_restriction(const DefectSet& d, const UniformityField& u)
{
  validate_uniformity(u);
  const Mat3Field Hinv = invert3(u.H);
  Tensor3Field T = Tensor3Field::generate(u.grid(), [&](int i, int j) {
    // skew parts T_{l a k}, l and k over all three indices
    Tensor3<3> s;
    for (int a = 0; a < 2; ++a)
    {
      for (int c = 0; c < 2; ++c)
      {
        for (int m = 0; m < 2; ++m) s(m, a, c) = d.Tmab(i, j)(m, a, c);
        s(2, a, c) = d.T3ab(i, j)(a, c);
      }
      for (int m = 0; m < 2; ++m)
      {
        s(m, a, 2) = d.Tma3(i, j)(m, a);
        s(m, 2, a) = -d.Tma3(i, j)(m, a);
      }
      s(2, a, 2) = d.T3a3(i, j)(a);
      s(2, 2, a) = -d.T3a3(i, j)(a);
    }
    const Mat3& hi = Hinv(i, j);
    Tensor3<3> t;
    for (int p = 0; p < 3; ++p)
      for (int a = 0; a < 3; ++a)
        for (int c = 0; c < 3; ++c)
        {
          double v = 0.0;
          for (int l = 0; l < 3; ++l) v += hi(p, l) * s(l, a, c);
          t(p, a, c) = v;
        }
    return t;
  });
  const Connection3 tmp{T, Tensor3Field::zero(u.grid())};
  TorsionSet out = torsion(tmp);
  return out;
}

namespace
{

// Cubic Lagrange value midway between nodes k and k + 1 of a line.
Mat3 midpoint(const std::vector<Mat3>& m, int k)
{
  const int n = static_cast<int>(m.size());
  if (k >= 1 && k + 2 < n) return (-m[k - 1] + 9.0 * m[k] + 9.0 * m[k + 1] - m[k + 2]) / 16.0;
  if (k == 0) return (5.0 * m[0] + 15.0 * m[1] - 5.0 * m[2] + m[3]) / 16.0;
  return (m[k - 2] - 5.0 * m[k - 1] + 15.0 * m[k] + 5.0 * m[k + 1]) / 16.0;
}

// dH/dt = H M(t) along a line of n nodes with spacing h, starting from H at node s.
std::vector<Mat3> integrate_line(const std::vector<Mat3>& M, double h, int s, const Mat3& Hs)
{
  const int n = static_cast<int>(M.size());
  std::vector<Mat3> H(n);
  H[s] = Hs;
  for (int k = s; k + 1 < n; ++k)
  {
    const Mat3 mid = midpoint(M, k);
    const Mat3 k1 = H[k] * M[k];
    const Mat3 k2 = (H[k] + 0.5 * h * k1) * mid;
    const Mat3 k3 = (H[k] + 0.5 * h * k2) * mid;
    const Mat3 k4 = (H[k] + h * k3) * M[k + 1];
    H[k + 1] = H[k] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  for (int k = s; k > 0; --k)
  {
    const Mat3 mid = midpoint(M, k - 1);
    const double b = -h;
    const Mat3 k1 = H[k] * M[k];
    const Mat3 k2 = (H[k] + 0.5 * b * k1) * mid;
    const Mat3 k3 = (H[k] + 0.5 * b * k2) * mid;
    const Mat3 k4 = (H[k] + b * k3) * M[k - 1];
    H[k - 1] = H[k] + b / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return H;
}

// (M_i)_{pj} = L^p_{ji}
Mat3 direction_matrix(const Tensor3<3>& L, int i)
{
  Mat3 m;
  for (int p = 0; p < 3; ++p)
    for (int j = 0; j < 3; ++j) m(p, j) = L(p, j, i);
  return m;
}

double max_abs_tensor(const Tensor4<3>& t)
{
  double m = 0.0;
  for (double v : t.c) m = std::max(m, std::abs(v));
  return m;
}

} // namespace

UniformityField integrate_uniformity(const Connection3& c, const Mat3& H0, const IntegrationOptions& opt)
{
  const ParamGrid& grid = c.grid();
  if (opt.seed_i < 0 || opt.seed_i >= grid.n1() || opt.seed_j < 0 || opt.seed_j >= grid.n2())
    throw Error("integrate_uniformity: seed node outside the grid");
  if (!H0.allFinite() || !(H0.determinant() > uniformity_det_floor))
    throw Error("integrate_uniformity: seed matrix must have det > " + std::to_string(uniformity_det_floor));
  const Tensor4Field R = material_curvature(c);
  const double hmax = std::max(grid.h1(), grid.h2());
  const double tol = opt.curvature_tol >= 0.0 ? opt.curvature_tol : 1e-6 + opt.integrability_c * hmax * hmax;
  std::size_t worst = 0;
  double rmax = 0.0;
  for (std::size_t k = 0; k < grid.node_count(); ++k)
  {
    const double r = max_abs_tensor(R[k]);
    if (r > rmax)
    {
      rmax = r;
      worst = k;
    }
  }
  if (rmax > tol)
  {
    std::ostringstream os;
    os << "integrate_uniformity: connection is not integrable, max |R| = " << rmax << " at " << describe_node(grid, worst)
       << " exceeds " << tol;
    throw NumericalError(os.str());
  }

  const int n1 = grid.n1();
  const int n2 = grid.n2();
  std::vector<Mat3> H(grid.node_count());
  const int first_dir = opt.theta1_first ? 0 : 1;
  const int second_dir = 1 - first_dir;
  auto line = [&](int dir, int fixed) {
    const int n = dir == 0 ? n1 : n2;
    std::vector<Mat3> M(n);
    for (int k = 0; k < n; ++k)
    {
      const int i = dir == 0 ? k : fixed;
      const int j = dir == 0 ? fixed : k;
      M[k] = direction_matrix(c.L(i, j), dir);
    }
    return M;
  };
  const int fixed_first = first_dir == 0 ? opt.seed_j : opt.seed_i;
  const int seed_first = first_dir == 0 ? opt.seed_i : opt.seed_j;
  const std::vector<Mat3> base = integrate_line(line(first_dir, fixed_first), grid.h(first_dir + 1), seed_first, H0);
  const int n_lines = first_dir == 0 ? n1 : n2;
  const int seed_second = second_dir == 0 ? opt.seed_i : opt.seed_j;
  detail::parallel_for(static_cast<std::size_t>(n_lines), [&](std::size_t b, std::size_t e) {
    for (std::size_t l = b; l < e; ++l)
    {
      const int fixed = static_cast<int>(l);
      const std::vector<Mat3> col = integrate_line(line(second_dir, fixed), grid.h(second_dir + 1), seed_second, base[l]);
      for (int k = 0; k < static_cast<int>(col.size()); ++k)
      {
        const int i = second_dir == 0 ? k : fixed;
        const int j = second_dir == 0 ? fixed : k;
        H[grid.node(i, j)] = col[k];
      }
    }
  });
  Mat3Field Hf = Mat3Field::generate(grid, [&](int i, int j) { return H[grid.node(i, j)]; });
  Mat3Field Hdz = zip([](const Mat3& h, const Tensor3<3>& L) -> Mat3 { return h * direction_matrix(L, 2); }, Hf, c.L);
  Mat3Field Hdzz = zip(
      [](const Mat3& h, const Mat3& hd, const Tensor3<3>& L, const Tensor3<3>& Ld) -> Mat3 {
        return hd * direction_matrix(L, 2) + h * direction_matrix(Ld, 2);
      },
      Hf, Hdz, c.L, c.Ldz);
  UniformityField u{std::move(Hf), std::move(Hdz), std::move(Hdzz), UniformityField::Provenance::integrated};
  validate_uniformity(u);
  return u;
}

double uniformity_pde_residual(const UniformityField& u, const Connection3& c)
{
  double r = 0.0;
  for (int dir = 1; dir <= 2; ++dir)
  {
    const Mat3Field d = partial(u.H, dir);
    const Mat3Field res =
        zip([dir](const Mat3& dh, const Mat3& h, const Tensor3<3>& L) -> Mat3 { return dh - h * direction_matrix(L, dir - 1); },
            d, u.H, c.L);
    r = std::max(r, res.max_norm());
  }
  return r;
}

} // namespace dshell

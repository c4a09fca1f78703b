#include "dshell/geometry.hpp"

#include <tuple>

namespace dshell
{

namespace
{

constexpr int eps3(int i, int j, int k)
{
  return (i - j) * (j - k) * (k - i) / 2;
}

Tensor3<3> raise(const Mat3& ginv, const Tensor3<3>& low)
{
  Tensor3<3> up;
  for (int p = 0; p < 3; ++p)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
      {
        double v = 0.0;
        for (int q = 0; q < 3; ++q) v += ginv(p, q) * low(i, j, q);
        up(p, i, j) = v;
      }
  return up;
}

/// S^p_{ij} = g^{mp}(T^q_{mj} g_{iq} + T^q_{mi} g_{jq}); linear in each argument.
Tensor3<3> contortion_correction(const Tensor3<3>& T, const Mat3& g, const Mat3& ginv)
{
  Tensor3<3> tg; // tg(m, j, i) = T^q_{mj} g_{iq}
  for (int m = 0; m < 3; ++m)
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i)
      {
        double v = 0.0;
        for (int q = 0; q < 3; ++q) v += T(q, m, j) * g(i, q);
        tg(m, j, i) = v;
      }
  Tensor3<3> out;
  for (int p = 0; p < 3; ++p)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
      {
        double v = 0.0;
        for (int m = 0; m < 3; ++m) v += ginv(m, p) * (tg(m, j, i) + tg(m, i, j));
        out(p, i, j) = v;
      }
  return out;
}

} // namespace

Tensor4Field Curvature3::full() const
{
  return Tensor4Field::generate(K[0].grid(), [&](int i, int j) {
    Tensor4<3> r;
    for (int s = 0; s < 6; ++s)
    {
      const auto [a, b, c, d] = slots[s];
      const double v = K[s](i, j);
      for (const auto& [p, q, sgn1] : {std::tuple{a, b, 1.0}, std::tuple{b, a, -1.0}})
        for (const auto& [u, w, sgn2] : {std::tuple{c, d, 1.0}, std::tuple{d, c, -1.0}})
        {
          r(p, q, u, w) = sgn1 * sgn2 * v;
          r(u, w, p, q) = sgn1 * sgn2 * v;
        }
    }
    return r;
  });
}

double Curvature3::max_norm() const
{
  double m = 0.0;
  for (const auto& f : K) m = std::max(m, f.max_norm());
  return m;
}

MetricJet metric_jet(const ShellMetric& m)
{
  Mat3Field g = metric_eval(m, 0.0);
  Mat3Field ginv = invert3(g);
  Mat3Field gdz = metric_dzeta(m, 0.0);
  const Mat3Field gdzz = Mat3Field::generate(m.grid(), [&](int i, int j) { return m.dzeta2_at(m.grid().node(i, j)); });
  std::array<Mat3Field, 3> dg{partial(g, 1), partial(g, 2), gdz};
  std::array<Mat3Field, 3> dgdz{partial(gdz, 1), partial(gdz, 2), gdzz};
  return {std::move(g), std::move(ginv), std::move(dg), std::move(dgdz), std::move(gdz)};
}

namespace
{

Tensor3Field christoffel_from(const ParamGrid& grid, const std::array<Mat3Field, 3>& dg)
{
  return Tensor3Field::generate(grid, [&](int i, int j) {
    Tensor3<3> c;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int p = 0; p < 3; ++p)
          c(a, b, p) = 0.5 * (dg[b](i, j)(a, p) + dg[a](i, j)(b, p) - dg[p](i, j)(a, b));
    return c;
  });
}

} // namespace

Tensor3Field christoffel_lower(const MetricJet& jet) { return christoffel_from(jet.g.grid(), jet.dg); }

Connection3 levi_civita(const ShellMetric& m) { return levi_civita(metric_jet(m)); }

Connection3 levi_civita(const MetricJet& jet)
{
  const Tensor3Field low = christoffel_from(jet.g.grid(), jet.dg);
  const Tensor3Field lowdz = christoffel_from(jet.g.grid(), jet.dgdz);
  Tensor3Field L = zip([](const Mat3& gi, const Tensor3<3>& t) { return raise(gi, t); }, jet.ginv, low);
  Tensor3Field Ldz = zip(
      [](const Mat3& gi, const Mat3& gd, const Tensor3<3>& t, const Tensor3<3>& td) {
        const Mat3 dginv = -gi * gd * gi;
        return raise(dginv, t) + raise(gi, td);
      },
      jet.ginv, jet.gdz, low, lowdz);
  return {std::move(L), std::move(Ldz)};
}

Tensor4Field material_curvature(const Connection3& c)
{
  const Tensor3Field d1 = partial(c.L, 1);
  const Tensor3Field d2 = partial(c.L, 2);
  return Tensor4Field::generate(c.grid(), [&](int n1, int n2) {
    const Tensor3<3>* d[3] = {&d1(n1, n2), &d2(n1, n2), &c.Ldz(n1, n2)};
    const Tensor3<3>& L = c.L(n1, n2);
    Tensor4<3> r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l)
          {
            double v = (*d[k])(i, j, l) - (*d[l])(i, j, k);
            for (int h = 0; h < 3; ++h) v += L(h, j, l) * L(i, h, k) - L(h, j, k) * L(i, h, l);
            r(i, j, k, l) = v;
          }
    return r;
  });
}

Tensor4Field lower_first(const Tensor4Field& r, const Mat3Field& g)
{
  return zip(
      [](const Tensor4<3>& up, const Mat3& gm) {
        Tensor4<3> low;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
              for (int l = 0; l < 3; ++l)
              {
                double v = 0.0;
                for (int q = 0; q < 3; ++q) v += gm(i, q) * up(q, j, k, l);
                low(i, j, k, l) = v;
              }
        return low;
      },
      r, g);
}

Curvature3 riemann_at_midsurface(const Connection3& c, const ShellMetric& m)
{
  return riemann_at_midsurface(c, metric_eval(m, 0.0));
}

Curvature3 riemann_at_midsurface(const Connection3& c, const Mat3Field& g)
{
  const Tensor4Field low = lower_first(material_curvature(c), g);
  auto pick = [&](int s) {
    const auto [a, b, cc, d] = Curvature3::slots[s];
    return low.map([a = a, b = b, cc = cc, d = d](const Tensor4<3>& t) { return t(a, b, cc, d); });
  };
  return Curvature3{{pick(0), pick(1), pick(2), pick(3), pick(4), pick(5)}};
}

TorsionSet torsion(const Connection3& c)
{
  auto anti = [](const Tensor3<3>& L) {
    Tensor3<3> t;
    for (int p = 0; p < 3; ++p)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) t(p, i, j) = 0.5 * (L(p, i, j) - L(p, j, i));
    return t;
  };
  Tensor3Field T = c.L.map(anti);
  Tensor3Field Tdz = c.Ldz.map(anti);
  Mat3Field axial = T.map([](const Tensor3<3>& t) {
    Mat3 a = Mat3::Zero();
    for (int k = 0; k < 3; ++k)
      for (int p = 0; p < 3; ++p)
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) a(k, p) += 0.5 * eps3(i, j, k) * t(p, i, j);
    return a;
  });
  return {std::move(T), std::move(Tdz), std::move(axial)};
}

Tensor3Field torsion_from_axial(const Mat3Field& axial)
{
  return axial.map([](const Mat3& a) {
    Tensor3<3> t;
    for (int p = 0; p < 3; ++p)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
        {
          double v = 0.0;
          for (int k = 0; k < 3; ++k) v += eps3(i, j, k) * a(k, p);
          t(p, i, j) = v;
        }
    return t;
  });
}

Tensor3Field contortion(const TorsionSet& t, const ShellMetric& m, double zeta)
{
  const Mat3Field g = metric_eval(m, zeta);
  const Mat3Field ginv = invert3(g);
  return Tensor3Field::generate(t.grid(), [&](int i, int j) {
    const Tensor3<3> T = t.T(i, j) + zeta * t.Tdz(i, j);
    return T - contortion_correction(T, g(i, j), ginv(i, j));
  });
}

Tensor3Field contortion(const TorsionSet& t, const MetricJet& jet)
{
  return Tensor3Field::generate(t.grid(), [&](int i, int j) {
    const Tensor3<3>& T = t.T(i, j);
    return T - contortion_correction(T, jet.g(i, j), jet.ginv(i, j));
  });
}

Tensor3Field contortion_dzeta(const TorsionSet& t, const ShellMetric& m) { return contortion_dzeta(t, metric_jet(m)); }

Tensor3Field contortion_dzeta(const TorsionSet& t, const MetricJet& jet)
{
  const Mat3Field& g = jet.g;
  const Mat3Field& ginv = jet.ginv;
  const Mat3Field& gdz = jet.gdz;
  return Tensor3Field::generate(t.grid(), [&](int i, int j) {
    const Tensor3<3>& T = t.T(i, j);
    const Tensor3<3>& Td = t.Tdz(i, j);
    const Mat3& gi = ginv(i, j);
    const Mat3 dginv = -gi * gdz(i, j) * gi;
    return Td - contortion_correction(Td, g(i, j), gi) - contortion_correction(T, gdz(i, j), gi) -
           contortion_correction(T, g(i, j), dginv);
  });
}

Tensor3Field nonmetricity(const ShellMetric& m, const Connection3& c) { return nonmetricity(metric_jet(m), c); }

Tensor3Field nonmetricity(const MetricJet& jet, const Connection3& c)
{
  return Tensor3Field::generate(jet.g.grid(), [&](int n1, int n2) {
    const Mat3& g = jet.g(n1, n2);
    const Tensor3<3>& L = c.L(n1, n2);
    Tensor3<3> q;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
        {
          double v = jet.dg[k](n1, n2)(i, j);
          for (int p = 0; p < 3; ++p) v -= L(p, i, k) * g(p, j) + L(p, j, k) * g(p, i);
          q(i, j, k) = v;
        }
    return q;
  });
}

Tensor4Field covariant_derivative_contortion(const Tensor3Field& C, const Tensor3Field& Cdz, const Connection3& lc)
{
  const Tensor3Field d1 = partial(C, 1);
  const Tensor3Field d2 = partial(C, 2);
  return Tensor4Field::generate(C.grid(), [&](int n1, int n2) {
    const Tensor3<3>* d[3] = {&d1(n1, n2), &d2(n1, n2), &Cdz(n1, n2)};
    const Tensor3<3>& c = C(n1, n2);
    const Tensor3<3>& G = lc.L(n1, n2);
    Tensor4<3> out;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int l = 0; l < 3; ++l)
          for (int k = 0; k < 3; ++k)
          {
            double v = (*d[k])(i, j, l);
            for (int q = 0; q < 3; ++q) v += G(i, q, k) * c(q, j, l) - G(q, j, k) * c(i, q, l) - G(q, l, k) * c(i, j, q);
            out(i, j, l, k) = v;
          }
    return out;
  });
}

Tensor4Field contortion_curvature(const TorsionSet& t, const MetricJet& jet)
{
  const Connection3 lc = levi_civita(jet);
  const Tensor3Field C = contortion(t, jet);
  const Tensor3Field Cdz = contortion_dzeta(t, jet);
  const Tensor4Field dC = covariant_derivative_contortion(C, Cdz, lc);
  return zip(
      [](const Tensor3<3>& c, const Tensor4<3>& cd) {
        Tensor4<3> x;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
              for (int l = 0; l < 3; ++l)
              {
                double v = cd(i, j, l, k) - cd(i, j, k, l);
                for (int h = 0; h < 3; ++h) v += c(h, j, l) * c(i, h, k) - c(h, j, k) * c(i, h, l);
                x(i, j, k, l) = v;
              }
        return x;
      },
      C, dC);
}

Tensor4Field curvature_decomposition_residual(const ShellMetric& m, const TorsionSet& t)
{
  return curvature_decomposition_residual(metric_jet(m), t);
}

Tensor4Field curvature_decomposition_residual(const MetricJet& jet, const TorsionSet& t)
{
  const Tensor4Field K = material_curvature(levi_civita(jet));
  const Tensor4Field X = contortion_curvature(t, jet);
  return zip([](const Tensor4<3>& a, const Tensor4<3>& b) { return a + b; }, K, X);
}

} // namespace dshell

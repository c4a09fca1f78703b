#pragma once

/// \file field.hpp
/// Rectangular parameter grids, per-node value fields and the second-order
/// finite-difference calculus every other module builds on.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dshell
{

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical precondition fails at a grid node.
class NumericalError : public Error
{
public:
  using Error::Error;
};

/// Dense third-order tensor with indices in [0, N).
template <int N>
struct Tensor3
{
  static constexpr int dim = N;
  std::array<double, N * N * N> c{};

  double& operator()(int a, int b, int d) { return c[(a * N + b) * N + d]; }
  double operator()(int a, int b, int d) const { return c[(a * N + b) * N + d]; }

  Tensor3& operator+=(const Tensor3& o)
  {
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += o.c[k];
    return *this;
  }
  Tensor3& operator-=(const Tensor3& o)
  {
    for (std::size_t k = 0; k < c.size(); ++k) c[k] -= o.c[k];
    return *this;
  }
  Tensor3& operator*=(double s)
  {
    for (auto& v : c) v *= s;
    return *this;
  }
  friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
  friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
  friend Tensor3 operator*(double s, Tensor3 a) { return a *= s; }
  friend Tensor3 operator-(Tensor3 a) { return a *= -1.0; }
};

/// Dense fourth-order tensor with indices in [0, N).
template <int N>
struct Tensor4
{
  static constexpr int dim = N;
  std::array<double, N * N * N * N> c{};

  double& operator()(int a, int b, int d, int e) { return c[((a * N + b) * N + d) * N + e]; }
  double operator()(int a, int b, int d, int e) const { return c[((a * N + b) * N + d) * N + e]; }

  Tensor4& operator+=(const Tensor4& o)
  {
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += o.c[k];
    return *this;
  }
  Tensor4& operator-=(const Tensor4& o)
  {
    for (std::size_t k = 0; k < c.size(); ++k) c[k] -= o.c[k];
    return *this;
  }
  Tensor4& operator*=(double s)
  {
    for (auto& v : c) v *= s;
    return *this;
  }
  friend Tensor4 operator+(Tensor4 a, const Tensor4& b) { return a += b; }
  friend Tensor4 operator-(Tensor4 a, const Tensor4& b) { return a -= b; }
  friend Tensor4 operator*(double s, Tensor4 a) { return a *= s; }
  friend Tensor4 operator-(Tensor4 a) { return a *= -1.0; }
};

/// Component layout of a per-node value type. Components are enumerated in
/// lexicographic index order (last index fastest).
template <class T>
struct ValueTraits;

template <>
struct ValueTraits<double>
{
  static constexpr int size = 1;
  static std::vector<int> dims() { return {}; }
  static double zero() { return 0.0; }
  static double get(const double& v, int) { return v; }
  static void set(double& v, int, double x) { v = x; }
};

template <int R, int C>
struct ValueTraits<Eigen::Matrix<double, R, C>>
{
  using Type = Eigen::Matrix<double, R, C>;
  static constexpr int size = R * C;
  static std::vector<int> dims()
  {
    if constexpr (C == 1)
      return {R};
    else
      return {R, C};
  }
  static Type zero() { return Type::Zero(); }
  static double get(const Type& v, int k) { return v(k / C, k % C); }
  static void set(Type& v, int k, double x) { v(k / C, k % C) = x; }
};

template <int N>
struct ValueTraits<Tensor3<N>>
{
  static constexpr int size = N * N * N;
  static std::vector<int> dims() { return {N, N, N}; }
  static Tensor3<N> zero() { return {}; }
  static double get(const Tensor3<N>& v, int k) { return v.c[k]; }
  static void set(Tensor3<N>& v, int k, double x) { v.c[k] = x; }
};

template <int N>
struct ValueTraits<Tensor4<N>>
{
  static constexpr int size = N * N * N * N;
  static std::vector<int> dims() { return {N, N, N, N}; }
  static Tensor4<N> zero() { return {}; }
  static double get(const Tensor4<N>& v, int k) { return v.c[k]; }
  static void set(Tensor4<N>& v, int k, double x) { v.c[k] = x; }
};

template <class T>
bool all_finite(const T& v)
{
  for (int k = 0; k < ValueTraits<T>::size; ++k)
    if (!std::isfinite(ValueTraits<T>::get(v, k))) return false;
  return true;
}

template <class T>
double max_abs(const T& v)
{
  double m = 0.0;
  for (int k = 0; k < ValueTraits<T>::size; ++k) m = std::max(m, std::abs(ValueTraits<T>::get(v, k)));
  return m;
}

struct Interval
{
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const Interval&) const = default;
};

/// Rectangular node grid over (t1, t2). Node (i, j) sits at
/// (t1.lo + i*h1, t2.lo + j*h2); storage order is i fastest.
class ParamGrid
{
public:
  static constexpr int min_nodes = 5;

  ParamGrid(Interval t1, Interval t2, int n1, int n2);

  const Interval& t1_range() const { return t1_; }
  const Interval& t2_range() const { return t2_; }
  int n1() const { return n1_; }
  int n2() const { return n2_; }
  double h1() const { return h1_; }
  double h2() const { return h2_; }
  double h(int direction) const { return direction == 1 ? h1_ : h2_; }
  int n(int direction) const { return direction == 1 ? n1_ : n2_; }
  double theta1(int i) const { return t1_.lo + i * h1_; }
  double theta2(int j) const { return t2_.lo + j * h2_; }
  std::size_t node_count() const { return static_cast<std::size_t>(n1_) * static_cast<std::size_t>(n2_); }
  std::size_t node(int i, int j) const { return static_cast<std::size_t>(j) * n1_ + i; }
  bool is_boundary(int i, int j) const { return i == 0 || j == 0 || i == n1_ - 1 || j == n2_ - 1; }

  /// Same grid with twice the resolution (2n-1 nodes per direction).
  ParamGrid refined() const { return ParamGrid(t1_, t2_, 2 * n1_ - 1, 2 * n2_ - 1); }

  bool operator==(const ParamGrid&) const = default;

private:
  Interval t1_;
  Interval t2_;
  int n1_;
  int n2_;
  double h1_;
  double h2_;
};

/// One-dimensional stencil: weights applied to at most six nodes of a line.
struct Stencil
{
  std::array<int, 6> index{};
  std::array<double, 6> weight{};
  int size = 0;
};

/// Second-order first-derivative stencil at position k of an n-node line.
Stencil first_derivative_stencil(int n, double h, int k);

/// Second-order compact second-derivative stencil at position k.
Stencil second_derivative_stencil(int n, double h, int k);

namespace detail
{
/// Worker count, capped by the CD_NUM_THREADS environment variable.
unsigned worker_count();

/// Runs body(begin, end) over disjoint chunks of [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);
} // namespace detail

/// Immutable per-node field on a ParamGrid.
template <class T>
class Field
{
public:
  using value_type = T;

  Field(ParamGrid grid, std::vector<T> values) : grid_(std::move(grid)), values_(std::move(values))
  {
    if (values_.size() != grid_.node_count())
      throw Error("field size " + std::to_string(values_.size()) + " does not match grid node count " +
                  std::to_string(grid_.node_count()));
  }

  /// Builds a field from f(i, j), evaluated node-parallel.
  template <class F>
  static Field generate(const ParamGrid& grid, F&& f)
  {
    std::vector<T> v(grid.node_count(), ValueTraits<T>::zero());
    detail::parallel_for(grid.node_count(), [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k)
      {
        const int i = static_cast<int>(k % grid.n1());
        const int j = static_cast<int>(k / grid.n1());
        v[k] = f(i, j);
      }
    });
    return Field(grid, std::move(v));
  }

  static Field constant(const ParamGrid& grid, const T& value)
  {
    return Field(grid, std::vector<T>(grid.node_count(), value));
  }

  static Field zero(const ParamGrid& grid) { return constant(grid, ValueTraits<T>::zero()); }

  const ParamGrid& grid() const { return grid_; }
  const T& operator()(int i, int j) const { return values_[grid_.node(i, j)]; }
  const T& operator[](std::size_t node) const { return values_[node]; }
  std::span<const T> values() const { return values_; }

  template <class F>
  auto map(F&& f) const
  {
    using U = std::decay_t<std::invoke_result_t<F&, const T&>>;
    return Field<U>::generate(grid_, [&](int i, int j) { return f((*this)(i, j)); });
  }

  /// Largest absolute component over all nodes.
  double max_norm() const
  {
    double m = 0.0;
    for (const auto& v : values_) m = std::max(m, max_abs(v));
    return m;
  }

  /// First node holding a non-finite component, or -1.
  long first_nonfinite() const
  {
    for (std::size_t k = 0; k < values_.size(); ++k)
      if (!all_finite(values_[k])) return static_cast<long>(k);
    return -1;
  }

private:
  ParamGrid grid_;
  std::vector<T> values_;
};

using ScalarField = Field<double>;
using Vec2Field = Field<Vec2>;
using VecField = Field<Vec3>;
using Mat2Field = Field<Mat2>;
using Mat3Field = Field<Mat3>;
using Tensor3Field2 = Field<Tensor3<2>>;
using Tensor3Field = Field<Tensor3<3>>;
using Tensor4Field = Field<Tensor4<3>>;

/// Applies f node-wise to several fields on the same grid.
template <class F, class T0, class... Ts>
auto zip(F&& f, const Field<T0>& first, const Field<Ts>&... rest)
{
  const ParamGrid& g = first.grid();
  if (!((rest.grid() == g) && ...)) throw Error("zip: fields live on different grids");
  using U = std::decay_t<std::invoke_result_t<F&, const T0&, const Ts&...>>;
  return Field<U>::generate(g, [&](int i, int j) { return f(first(i, j), rest(i, j)...); });
}

std::string describe_node(const ParamGrid& grid, std::size_t node);

template <class T>
void require_finite(const Field<T>& f, const char* what)
{
  if (const long k = f.first_nonfinite(); k >= 0)
    throw NumericalError(std::string(what) + ": non-finite value at " +
                         describe_node(f.grid(), static_cast<std::size_t>(k)));
}

template <class T>
Field<T> apply_stencil(const Field<T>& f, int direction, Stencil (*make)(int, double, int))
{
  if (direction != 1 && direction != 2) throw Error("derivative direction must be 1 or 2");
  const ParamGrid& g = f.grid();
  return Field<T>::generate(g, [&](int i, int j) {
    const int k = direction == 1 ? i : j;
    const Stencil s = make(g.n(direction), g.h(direction), k);
    T acc = ValueTraits<T>::zero();
    for (int m = 0; m < s.size; ++m)
    {
      const T& v = direction == 1 ? f(s.index[m], j) : f(i, s.index[m]);
      acc += s.weight[m] * v;
    }
    return acc;
  });
}

/// First partial derivative along direction 1 or 2: central in the interior,
/// one-sided at the boundary, second order everywhere.
template <class T>
Field<T> partial(const Field<T>& f, int direction)
{
  require_finite(f, "partial");
  return apply_stencil(f, direction, &first_derivative_stencil);
}

/// Second partial derivative along one direction (compact stencil).
template <class T>
Field<T> partial2(const Field<T>& f, int direction)
{
  require_finite(f, "partial2");
  return apply_stencil(f, direction, &second_derivative_stencil);
}

/// Mixed derivative d^2/dt1 dt2 as a composition of first derivatives.
template <class T>
Field<T> partial12(const Field<T>& f)
{
  return partial(partial(f, 1), 2);
}

inline constexpr double default_det_floor = 1e-12;

Mat2Field invert2(const Mat2Field& m, double det_floor = default_det_floor);
Mat3Field invert3(const Mat3Field& m, double det_floor = default_det_floor);

/// Node-wise symmetric part.
Mat2Field symmetric_part(const Mat2Field& m);

/// Grid sampled coordinates, handy for building analytic fixtures.
ScalarField coordinate_field(const ParamGrid& grid, int direction);

} // namespace dshell

#include "dshell/field.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <Eigen/LU>

namespace dshell
{

ParamGrid::ParamGrid(Interval t1, Interval t2, int n1, int n2) : t1_(t1), t2_(t2), n1_(n1), n2_(n2)
{
  if (n1 < min_nodes || n2 < min_nodes)
    throw Error("grid needs at least " + std::to_string(min_nodes) + " nodes per direction, got " +
                std::to_string(n1) + "x" + std::to_string(n2));
  if (!(t1.hi > t1.lo) || !(t2.hi > t2.lo)) throw Error("grid interval must have hi > lo");
  h1_ = (t1.hi - t1.lo) / (n1 - 1);
  h2_ = (t2.hi - t2.lo) / (n2 - 1);
  if (!(h1_ > 0.0) || !(h2_ > 0.0)) throw Error("grid spacing must be strictly positive");
}

// One-sided closure whose truncation error matches the central stencil's
// error series f' + h^2 f(3)/6 + h^4 f(5)/120, so nested derivatives keep
// second order up to the boundary. Still exact for quadratics.
Stencil first_derivative_stencil(int n, double h, int k)
{
  static constexpr double w6[6] = {-3.0, 8.0, -10.0, 7.5, -3.0, 0.5};
  static constexpr double w4[4] = {-2.0, 3.5, -2.0, 0.5};
  Stencil s;
  if (k == 0 || k == n - 1)
  {
    const bool wide = n >= 6;
    const double* w = wide ? w6 : w4;
    s.size = wide ? 6 : 4;
    const double sign = k == 0 ? 1.0 : -1.0;
    for (int m = 0; m < s.size; ++m)
    {
      s.index[m] = k == 0 ? m : n - 1 - m;
      s.weight[m] = sign * w[m] / h;
    }
    return s;
  }
  s.size = 2;
  s.index = {k - 1, k + 1};
  s.weight = {-0.5 / h, 0.5 / h};
  return s;
}

Stencil second_derivative_stencil(int n, double h, int k)
{
  const double h2 = h * h;
  Stencil s;
  if (k == 0)
  {
    s.size = 4;
    s.index = {0, 1, 2, 3};
    s.weight = {2.0 / h2, -5.0 / h2, 4.0 / h2, -1.0 / h2};
  }
  else if (k == n - 1)
  {
    s.size = 4;
    s.index = {n - 4, n - 3, n - 2, n - 1};
    s.weight = {-1.0 / h2, 4.0 / h2, -5.0 / h2, 2.0 / h2};
  }
  else
  {
    s.size = 3;
    s.index = {k - 1, k, k + 1};
    s.weight = {1.0 / h2, -2.0 / h2, 1.0 / h2};
  }
  return s;
}

namespace detail
{

unsigned worker_count()
{
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CD_NUM_THREADS"))
  {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body)
{
  constexpr std::size_t min_chunk = 2048;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), (n + min_chunk - 1) / min_chunk));
  if (workers <= 1)
  {
    body(0, n);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w)
    {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(n, b + chunk);
      if (b >= e) break;
      pool.emplace_back([&, b, e] {
        try
        {
          body(b, e);
        }
        catch (...)
        {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

} // namespace detail

std::string describe_node(const ParamGrid& grid, std::size_t node)
{
  const int i = static_cast<int>(node % grid.n1());
  const int j = static_cast<int>(node / grid.n1());
  std::ostringstream os;
  os << "node (i=" << i << ", j=" << j << ") at (t1=" << grid.theta1(i) << ", t2=" << grid.theta2(j) << ")";
  return os.str();
}

namespace
{

template <class M>
Field<M> invert_impl(const Field<M>& m, double det_floor, const char* name)
{
  require_finite(m, name);
  const ParamGrid& g = m.grid();
  for (std::size_t k = 0; k < g.node_count(); ++k)
  {
    const double det = m[k].determinant();
    if (!(std::abs(det) > det_floor))
    {
      std::ostringstream os;
      os << name << ": near-singular matrix at " << describe_node(g, k) << ", det = " << det;
      throw NumericalError(os.str());
    }
  }
  return m.map([](const M& a) -> M { return a.inverse(); });
}

} // namespace

Mat2Field invert2(const Mat2Field& m, double det_floor) { return invert_impl(m, det_floor, "invert2"); }

Mat3Field invert3(const Mat3Field& m, double det_floor) { return invert_impl(m, det_floor, "invert3"); }

Mat2Field symmetric_part(const Mat2Field& m)
{
  return m.map([](const Mat2& a) -> Mat2 { return 0.5 * (a + a.transpose()); });
}

ScalarField coordinate_field(const ParamGrid& grid, int direction)
{
  return ScalarField::generate(grid,
                               [&](int i, int j) { return direction == 1 ? grid.theta1(i) : grid.theta2(j); });
}

} // namespace dshell

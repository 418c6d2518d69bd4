#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "mcomp/core/errors.hpp"
#include "mcomp/pde/grid.hpp"

namespace mcomp::pde {

namespace detail {

struct Stencil {
  std::array<int, 4> offset{};
  std::array<double, 4> weight{};
  int size = 0;
};

/// Second-order first-derivative weights at index i of an n-node axis.
inline Stencil first_derivative(int i, int n, double h) {
  Stencil s;
  s.size = 3;
  if (i == 0) {
    s.offset = {0, 1, 2, 0};
    s.weight = {-1.5 / h, 2.0 / h, -0.5 / h, 0.0};
  } else if (i == n - 1) {
    s.offset = {0, -1, -2, 0};
    s.weight = {1.5 / h, -2.0 / h, 0.5 / h, 0.0};
  } else {
    s.offset = {-1, 0, 1, 0};
    s.weight = {-0.5 / h, 0.0, 0.5 / h, 0.0};
  }
  return s;
}

/// Second-derivative weights; second-order one-sided at edges when n >= 4.
inline Stencil second_derivative(int i, int n, double h) {
  Stencil s;
  const double h2 = h * h;
  if (i > 0 && i < n - 1) {
    s.size = 3;
    s.offset = {-1, 0, 1, 0};
    s.weight = {1.0 / h2, -2.0 / h2, 1.0 / h2, 0.0};
    return s;
  }
  const int dir = i == 0 ? 1 : -1;
  if (n >= 4) {
    s.size = 4;
    s.offset = {0, dir, 2 * dir, 3 * dir};
    s.weight = {2.0 / h2, -5.0 / h2, 4.0 / h2, -1.0 / h2};
  } else {
    s.size = 3;
    s.offset = {0, dir, 2 * dir, 0};
    s.weight = {1.0 / h2, -2.0 / h2, 1.0 / h2, 0.0};
  }
  return s;
}

}  // namespace detail

/// Samples of a function v(t, x) on the nodes of a grid at a monotone set of
/// time levels, with finite-difference accessors.
///
/// Space derivatives use central differences inside and second-order
/// one-sided stencils on the box faces. The time derivative uses 3-point
/// Lagrange stencils across stored levels (central inside, one-sided at the
/// first and last level).
class ValueField {
 public:
  ValueField() = default;

  ValueField(SpaceTimeGrid grid, std::vector<double> times)
      : grid_(std::move(grid)), times_(std::move(times)), values_(times_.size() * grid_.nodes(), 0.0) {
    for (std::size_t k = 1; k < times_.size(); ++k)
      if (!(times_[k] > times_[k - 1])) throw GridError("ValueField: time levels must be increasing");
  }

  /// All levels t_k = k / n_t of the grid.
  static ValueField on_grid(const SpaceTimeGrid& grid) {
    std::vector<double> times(grid.n_t + 1);
    for (int k = 0; k <= grid.n_t; ++k) times[k] = grid.t(k);
    return ValueField(grid, std::move(times));
  }

  /// Samples fn(t, x) on every level and node.
  static ValueField sample(const SpaceTimeGrid& grid, const std::function<double(double, const Vec2&)>& fn) {
    ValueField v = on_grid(grid);
    for (int k = 0; k < v.levels(); ++k)
      for (int i = 0; i < grid.n1; ++i)
        for (int j = 0; j < grid.n2; ++j) v.at(k, i, j) = fn(v.time(k), grid.node(i, j));
    return v;
  }

  const SpaceTimeGrid& grid() const { return grid_; }
  int levels() const { return static_cast<int>(times_.size()); }
  double time(int k) const { return times_[k]; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& data() const { return values_; }

  std::size_t index(int k, int i, int j) const {
    return static_cast<std::size_t>(k) * grid_.nodes() + static_cast<std::size_t>(i) * grid_.n2 + j;
  }
  double& at(int k, int i, int j) { return values_[index(k, i, j)]; }
  double at(int k, int i, int j) const { return values_[index(k, i, j)]; }
  double* level_data(int k) { return values_.data() + static_cast<std::size_t>(k) * grid_.nodes(); }
  const double* level_data(int k) const { return values_.data() + static_cast<std::size_t>(k) * grid_.nodes(); }

  /// Level whose time equals t to within 1e-12, or -1.
  int level_of(double t) const {
    for (int k = 0; k < levels(); ++k)
      if (std::abs(times_[k] - t) <= 1e-12) return k;
    return -1;
  }

  double d1(int k, int i, int j) const {
    const auto s = detail::first_derivative(i, grid_.n1, grid_.h(0));
    double acc = 0.0;
    for (int q = 0; q < s.size; ++q) acc += s.weight[q] * at(k, i + s.offset[q], j);
    return acc;
  }

  double d2(int k, int i, int j) const {
    const auto s = detail::first_derivative(j, grid_.n2, grid_.h(1));
    double acc = 0.0;
    for (int q = 0; q < s.size; ++q) acc += s.weight[q] * at(k, i, j + s.offset[q]);
    return acc;
  }

  /// d/dx_axis
  double d(int axis, int k, int i, int j) const { return axis == 0 ? d1(k, i, j) : d2(k, i, j); }

  double d11(int k, int i, int j) const {
    const auto s = detail::second_derivative(i, grid_.n1, grid_.h(0));
    double acc = 0.0;
    for (int q = 0; q < s.size; ++q) acc += s.weight[q] * at(k, i + s.offset[q], j);
    return acc;
  }

  double d22(int k, int i, int j) const {
    const auto s = detail::second_derivative(j, grid_.n2, grid_.h(1));
    double acc = 0.0;
    for (int q = 0; q < s.size; ++q) acc += s.weight[q] * at(k, i, j + s.offset[q]);
    return acc;
  }

  double d12(int k, int i, int j) const {
    const auto s1 = detail::first_derivative(i, grid_.n1, grid_.h(0));
    const auto s2 = detail::first_derivative(j, grid_.n2, grid_.h(1));
    double acc = 0.0;
    for (int p = 0; p < s1.size; ++p)
      for (int q = 0; q < s2.size; ++q) acc += s1.weight[p] * s2.weight[q] * at(k, i + s1.offset[p], j + s2.offset[q]);
    return acc;
  }

  /// d^2/dx_a dx_b
  double dd(int a, int b, int k, int i, int j) const {
    if (a != b) return d12(k, i, j);
    return a == 0 ? d11(k, i, j) : d22(k, i, j);
  }

  double dt(int k, int i, int j) const {
    if (levels() < 3) throw GridError("ValueField::dt needs at least 3 stored levels");
    const int c = std::clamp(k, 1, levels() - 2);
    const double t0 = times_[c - 1], t1 = times_[c], t2 = times_[c + 1], t = times_[k];
    // derivative of the quadratic through the three levels, evaluated at t
    const double w0 = ((t - t1) + (t - t2)) / ((t0 - t1) * (t0 - t2));
    const double w1 = ((t - t0) + (t - t2)) / ((t1 - t0) * (t1 - t2));
    const double w2 = ((t - t0) + (t - t1)) / ((t2 - t0) * (t2 - t1));
    return w0 * at(c - 1, i, j) + w1 * at(c, i, j) + w2 * at(c + 1, i, j);
  }

  /// Bilinear interpolation of level k; x is clipped to the box.
  double interpolate_level(int k, const Vec2& x) const {
    const double h1 = grid_.h(0), h2 = grid_.h(1);
    const double s1 = std::clamp((x[0] - grid_.box.lo[0]) / h1, 0.0, static_cast<double>(grid_.n1 - 1));
    const double s2 = std::clamp((x[1] - grid_.box.lo[1]) / h2, 0.0, static_cast<double>(grid_.n2 - 1));
    const int i = std::min(static_cast<int>(s1), grid_.n1 - 2);
    const int j = std::min(static_cast<int>(s2), grid_.n2 - 2);
    const double a = s1 - i, b = s2 - j;
    return (1 - a) * (1 - b) * at(k, i, j) + a * (1 - b) * at(k, i + 1, j) + (1 - a) * b * at(k, i, j + 1) +
           a * b * at(k, i + 1, j + 1);
  }

  /// Bilinear in x, linear in t between stored levels.
  double interpolate(double t, const Vec2& x) const {
    if (levels() == 1) return interpolate_level(0, x);
    if (t <= times_.front()) return interpolate_level(0, x);
    if (t >= times_.back()) return interpolate_level(levels() - 1, x);
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const int k1 = static_cast<int>(it - times_.begin());
    const int k0 = k1 - 1;
    const double w = (t - times_[k0]) / (times_[k1] - times_[k0]);
    return (1 - w) * interpolate_level(k0, x) + w * interpolate_level(k1, x);
  }

  /// Field of the discrete x_axis-derivative on every level.
  ValueField derivative_field(int axis) const {
    ValueField out(grid_, times_);
    for (int k = 0; k < levels(); ++k)
      for (int i = 0; i < grid_.n1; ++i)
        for (int j = 0; j < grid_.n2; ++j) out.at(k, i, j) = d(axis, k, i, j);
    return out;
  }

 private:
  SpaceTimeGrid grid_;
  std::vector<double> times_;
  std::vector<double> values_;
};

/// Nodes at least `margin_nodes` from every face and inside the central part
/// of the box that excludes `margin_fraction` of each width on both sides.
struct InteriorRegion {
  double margin_fraction = 0.1;
  int margin_nodes = 2;

  bool contains(const SpaceTimeGrid& g, int i, int j) const {
    if (i < margin_nodes || j < margin_nodes || i >= g.n1 - margin_nodes || j >= g.n2 - margin_nodes) return false;
    const Vec2 x = g.node(i, j);
    for (int a = 0; a < 2; ++a) {
      const double m = margin_fraction * g.box.width(a);
      if (x[a] < g.box.lo[a] + m || x[a] > g.box.hi[a] - m) return false;
    }
    return true;
  }
};

}  // namespace mcomp::pde

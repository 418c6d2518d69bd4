#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "mcomp/core/box.hpp"
#include "mcomp/core/errors.hpp"
#include "mcomp/model/diffusion_model.hpp"

namespace mcomp::pde {

/// Uniform tensor grid on box x [0, 1] with the time-stepping parameters.
struct SpaceTimeGrid {
  Box box;
  int n1 = 101;
  int n2 = 101;
  int n_t = 100;
  double theta = 0.5;
  int rannacher_steps = 2;

  int n(int axis) const { return axis == 0 ? n1 : n2; }
  double h(int axis) const { return box.width(axis) / (n(axis) - 1); }
  double x(int axis, int i) const { return box.lo[axis] + i * h(axis); }
  Vec2 node(int i, int j) const { return {x(0, i), x(1, j)}; }
  double dt() const { return 1.0 / n_t; }
  double t(int level) const { return static_cast<double>(level) / n_t; }
  std::size_t nodes() const { return static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2); }

  void check() const {
    if (n1 < 3 || n2 < 3) throw GridError("grid needs at least 3 nodes per axis");
    if (n_t < 1) throw GridError("grid needs at least one time step");
    if (!box.valid()) throw GridError("grid box must have positive width");
    if (theta < 0.0 || theta > 1.0) throw GridError("theta must lie in [0, 1]");
    if (rannacher_steps < 0) throw GridError("rannacher_steps must be nonnegative");
  }
};

/// Shifts `box` along `axis` by at most half a cell so that `position` lies
/// midway between two grid lines of an n-node axis. No-op when position is
/// outside the box.
inline Box align_to_kink(Box box, int axis, int n, double position) {
  if (position <= box.lo[axis] || position >= box.hi[axis]) return box;
  const double h = box.width(axis) / (n - 1);
  const double s = (position - box.lo[axis]) / h;
  const double shift = (s - std::floor(s) - 0.5) * h;
  box.lo[axis] += shift;
  box.hi[axis] += shift;
  return box;
}

/// Box of +-k standard deviations of X_1 around x0, using the variance
/// integral of a^{jj}(t, x0) over [0, 1]. Widths are at least min_width.
inline Box default_box(const model::DiffusionModel& m, double k = 6.0, double min_width = 1e-3) {
  Vec2 var{0.0, 0.0};
  constexpr int kSteps = 64;
  for (int s = 0; s < kSteps; ++s) {
    const double t = (s + 0.5) / kSteps;
    const auto c = model::eval_coeffs(m, t, m.x0);
    var[0] += c.a[0][0] / kSteps;
    var[1] += c.a[1][1] / kSteps;
  }
  Box b;
  for (int j = 0; j < 2; ++j) {
    const double half = std::max(k * std::sqrt(var[j]), 0.5 * min_width);
    b.lo[j] = m.x0[j] - half;
    b.hi[j] = m.x0[j] + half;
  }
  return b;
}

/// Grid for `m` on its default box, with the payoff kink (if any) placed midway
/// between grid lines.
inline SpaceTimeGrid make_grid(const model::DiffusionModel& m, int n1, int n2, int n_t, double k = 6.0,
                               double theta = 0.5, int rannacher_steps = 2) {
  SpaceTimeGrid g;
  g.box = default_box(m, k);
  g.n1 = n1;
  g.n2 = n2;
  g.n_t = n_t;
  g.theta = theta;
  g.rannacher_steps = rannacher_steps;
  if (m.payoff.kink) g.box = align_to_kink(g.box, m.payoff.kink->axis, g.n(m.payoff.kink->axis), m.payoff.kink->position);
  g.check();
  return g;
}

}  // namespace mcomp::pde

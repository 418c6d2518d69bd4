#pragma once

#include <stdexcept>

#include "mcomp/core/linalg.hpp"

namespace mcomp {

/// Axis-aligned rectangle [lo[0], hi[0]] x [lo[1], hi[1]].
struct Box {
  Vec2 lo{-1.0, -1.0};
  Vec2 hi{1.0, 1.0};

  double width(int axis) const { return hi[axis] - lo[axis]; }
  double center(int axis) const { return 0.5 * (lo[axis] + hi[axis]); }
  bool contains(const Vec2& x) const { return x[0] >= lo[0] && x[0] <= hi[0] && x[1] >= lo[1] && x[1] <= hi[1]; }
  bool valid() const { return hi[0] > lo[0] && hi[1] > lo[1]; }

  /// Point at unit coordinates u in [0,1]^2.
  Vec2 at(double u0, double u1) const { return {lo[0] + u0 * width(0), lo[1] + u1 * width(1)}; }

  void check() const {
    if (!valid()) throw std::invalid_argument("box must have positive width on both axes");
  }
};

}  // namespace mcomp

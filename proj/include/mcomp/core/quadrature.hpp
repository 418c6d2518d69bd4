#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace mcomp {

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n) : nodes(n), weights(n) {
    if (n < 1) throw std::invalid_argument("GaussLegendre: need at least one point");
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
      }
      nodes[i] = -x;
      nodes[n - 1 - i] = x;
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      weights[i] = w;
      weights[n - 1 - i] = w;
    }
  }

  int size() const { return static_cast<int>(nodes.size()); }

  /// Composite rule over [a, b] split at the given sorted breakpoints; calls
  /// visit(x, w) for every node.
  template <class Visit>
  void composite(const std::vector<double>& breaks, int subdivisions, Visit&& visit) const {
    for (std::size_t c = 0; c + 1 < breaks.size(); ++c) {
      const double lo = breaks[c], hi = breaks[c + 1];
      if (!(hi > lo)) continue;
      const double h = (hi - lo) / subdivisions;
      for (int s = 0; s < subdivisions; ++s) {
        const double a = lo + s * h;
        const double half = 0.5 * h;
        for (int q = 0; q < size(); ++q) visit(a + half * (nodes[q] + 1.0), half * weights[q]);
      }
    }
  }
};

}  // namespace mcomp

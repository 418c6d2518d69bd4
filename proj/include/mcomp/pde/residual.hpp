#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mcomp/core/errors.hpp"
#include "mcomp/model/diffusion_model.hpp"
#include "mcomp/pde/value_field.hpp"

namespace mcomp::pde {

/// Levels with t in [t_lo, t_hi] and nodes inside `region` enter the norms.
struct ResidualWindow {
  double t_lo = 0.1;
  double t_hi = 0.9;
  InteriorRegion region{};
};

/// Interior residual norms. Per-level L2 norms are weighted by h1 h2; the
/// overall L2 norm is additionally weighted by dt.
struct ResidualReport {
  std::vector<double> times;
  std::vector<double> level_l2;
  std::vector<double> level_max;
  double l2 = 0.0;
  double max = 0.0;
  long nodes = 0;
};

/// Accumulates norms of rho(k, i, j) over the window.
inline ResidualReport residual_norms(const ValueField& v, const ResidualWindow& w,
                                     const std::function<double(int, int, int)>& rho) {
  const auto& g = v.grid();
  const double cell = g.h(0) * g.h(1);
  ResidualReport rep;
  double total = 0.0;
  for (int k = 0; k < v.levels(); ++k) {
    const double t = v.time(k);
    if (t < w.t_lo - 1e-12 || t > w.t_hi + 1e-12) continue;
    double sq = 0.0, mx = 0.0;
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        if (!w.region.contains(g, i, j)) continue;
        const double r = std::abs(rho(k, i, j));
        sq += r * r;
        mx = std::max(mx, r);
        ++rep.nodes;
      }
    const double dtk = k + 1 < v.levels() ? v.time(k + 1) - t : t - v.time(k - 1);
    rep.times.push_back(t);
    rep.level_l2.push_back(std::sqrt(sq * cell));
    rep.level_max.push_back(mx);
    total += sq * cell * dtk;
    rep.max = std::max(rep.max, mx);
  }
  rep.l2 = std::sqrt(total);
  return rep;
}

/// d_t v + L^X v - r v at interior nodes.
inline ResidualReport pde_residual(const model::DiffusionModel& m, const ValueField& v, const ResidualWindow& w = {}) {
  if (v.levels() < 3) throw GridError("pde_residual needs at least 3 stored levels");
  const auto& g = v.grid();
  return residual_norms(v, w, [&](int k, int i, int j) {
    const auto c = model::eval_coeffs(m, v.time(k), g.node(i, j));
    return v.dt(k, i, j) +
           0.5 * (c.a[0][0] * v.d11(k, i, j) + 2.0 * c.a[0][1] * v.d12(k, i, j) + c.a[1][1] * v.d22(k, i, j)) +
           c.b[0] * v.d1(k, i, j) + c.b[1] * v.d2(k, i, j) - c.r * v.at(k, i, j);
  });
}

/// d_t v_j + (L^X - r) v_j + G_j v, with v_j the discrete x_j-derivative of v
/// and G_j the operator whose coefficients are the x_j-derivatives of those of
/// L^X - r.
inline ResidualReport derivative_pde_residual(const model::DiffusionModel& m, const ValueField& v, int axis,
                                              const ResidualWindow& w = {}) {
  if (v.levels() < 3) throw GridError("derivative_pde_residual needs at least 3 stored levels");
  if (axis != 0 && axis != 1) throw std::invalid_argument("derivative_pde_residual: axis must be 0 or 1");
  for (const auto& row : m.vol)
    for (const auto& s : row) s.require(1, false, false);
  for (const auto& b : m.drift) b.require(1, false, false);
  m.rate.require(1, false, false);
  const ValueField vj = v.derivative_field(axis);
  const auto& g = v.grid();
  return residual_norms(v, w, [&](int k, int i, int j) {
    const double t = v.time(k);
    const Vec2 x = g.node(i, j);
    const auto a = m.covariance_jets(t, x);
    const auto b = m.drift_jets(t, x);
    const Jet r = m.rate.jet(t, x);
    double res = vj.dt(k, i, j) - r.v * vj.at(k, i, j) - r.x[axis] * v.at(k, i, j);
    for (int p = 0; p < 2; ++p) {
      res += b[p].v * vj.d(p, k, i, j) + b[p].x[axis] * v.d(p, k, i, j);
      for (int q = 0; q < 2; ++q)
        res += 0.5 * (a[p][q].v * vj.dd(p, q, k, i, j) + a[p][q].x[axis] * v.dd(p, q, k, i, j));
    }
    return res;
  });
}

}  // namespace mcomp::pde

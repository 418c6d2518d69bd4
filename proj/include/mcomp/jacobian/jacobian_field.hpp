#pragma once

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcomp/model/diffusion_model.hpp"
#include "mcomp/model/structural_operators.hpp"
#include "mcomp/pde/export.hpp"
#include "mcomp/pde/residual.hpp"
#include "mcomp/pde/value_field.hpp"

namespace mcomp::jacobian {

/// Rows (grad f, grad v) of J[f, v] on every level and node of a solution
/// grid, with w = det J and s = |grad f| |grad v|.
class JacobianField {
 public:
  struct Entry {
    Vec2 grad_f{};
    Vec2 grad_v{};
    double w = 0.0;
    double s = 0.0;
  };

  JacobianField(pde::SpaceTimeGrid grid, std::vector<double> times)
      : grid_(std::move(grid)), times_(std::move(times)), data_(times_.size() * grid_.nodes()) {}

  const pde::SpaceTimeGrid& grid() const { return grid_; }
  int levels() const { return static_cast<int>(times_.size()); }
  double time(int k) const { return times_[k]; }
  Entry& at(int k, int i, int j) { return data_[index(k, i, j)]; }
  const Entry& at(int k, int i, int j) const { return data_[index(k, i, j)]; }

  Mat2 matrix(int k, int i, int j) const {
    const auto& e = at(k, i, j);
    return from_rows(e.grad_f, e.grad_v);
  }

  /// w as a ValueField, for residual checks.
  pde::ValueField det_field() const {
    pde::ValueField out(grid_, times_);
    for (int k = 0; k < levels(); ++k)
      for (int i = 0; i < grid_.n1; ++i)
        for (int j = 0; j < grid_.n2; ++j) out.at(k, i, j) = at(k, i, j).w;
    return out;
  }

 private:
  std::size_t index(int k, int i, int j) const {
    return static_cast<std::size_t>(k) * grid_.nodes() + static_cast<std::size_t>(i) * grid_.n2 + j;
  }

  pde::SpaceTimeGrid grid_;
  std::vector<double> times_;
  std::vector<Entry> data_;
};

/// grad f analytic, grad v by central differences (one-sided on faces).
inline JacobianField jacobian_field(const model::DiffusionModel& m, const pde::ValueField& v) {
  m.forward.require(1, false, false);
  const auto& g = v.grid();
  JacobianField out(g, v.times());
  for (int k = 0; k < v.levels(); ++k)
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        auto& e = out.at(k, i, j);
        const Jet f = m.forward.jet(v.time(k), g.node(i, j));
        e.grad_f = {f.x[0], f.x[1]};
        e.grad_v = {v.d1(k, i, j), v.d2(k, i, j)};
        e.w = e.grad_f[0] * e.grad_v[1] - e.grad_f[1] * e.grad_v[0];
        e.s = norm(e.grad_f) * norm(e.grad_v);
      }
  return out;
}

struct RankDiagnostics {
  double tol_rel = 1e-6;
  double max_fraction = 1e-3;
  std::vector<double> times;
  std::vector<double> near_singular_fraction;
  double overall = 0.0;
  bool full_rank = false;
};

/// A node is near-singular when |w| < tol_rel * s (s = 0 counts as singular).
/// full_rank when the overall fraction is at most max_fraction.
inline RankDiagnostics rank_diagnostics(const JacobianField& jf, double tol_rel = 1e-6, double max_fraction = 1e-3) {
  RankDiagnostics d;
  d.tol_rel = tol_rel;
  d.max_fraction = max_fraction;
  const auto& g = jf.grid();
  long singular = 0, total = 0;
  for (int k = 0; k < jf.levels(); ++k) {
    long level_singular = 0;
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        const auto& e = jf.at(k, i, j);
        if (!(std::abs(e.w) >= tol_rel * e.s) || e.s == 0.0) ++level_singular;
      }
    d.times.push_back(jf.time(k));
    d.near_singular_fraction.push_back(static_cast<double>(level_singular) / static_cast<double>(g.nodes()));
    singular += level_singular;
    total += static_cast<long>(g.nodes());
  }
  d.overall = total ? static_cast<double>(singular) / static_cast<double>(total) : 0.0;
  d.full_rank = d.overall <= max_fraction;
  return d;
}

/// d_t w + (L^X - 2r) w + P v with w = det J[f, v] and
/// P = 1/2 sum A^{jk} d_jk + sum B^j d_j - C in the generator convention.
inline pde::ResidualReport determinant_evolution_residual(const model::DiffusionModel& m, const model::CoefficientField& f,
                                                          const pde::ValueField& v, const pde::ResidualWindow& w = {}) {
  if (v.levels() < 3) throw GridError("determinant_evolution_residual needs at least 3 stored levels");
  model::DiffusionModel mf = m;
  mf.forward = f;
  const pde::ValueField wf = jacobian_field(mf, v).det_field();
  const auto& g = v.grid();
  return pde::residual_norms(v, w, [&](int k, int i, int j) {
    const double t = v.time(k);
    const Vec2 x = g.node(i, j);
    const auto c = model::eval_coeffs(mf, t, x);
    const auto ops = model::structural_operators(mf, t, x);
    double res = wf.dt(k, i, j) - 2.0 * c.r * wf.at(k, i, j) - ops.C * v.at(k, i, j);
    for (int p = 0; p < 2; ++p) {
      res += c.b[p] * wf.d(p, k, i, j) + ops.B[p] * v.d(p, k, i, j);
      for (int q = 0; q < 2; ++q) res += 0.5 * (c.a[p][q] * wf.dd(p, q, k, i, j) + ops.A[p][q] * v.dd(p, q, k, i, j));
    }
    return res;
  });
}

/// Rows (t, x1, x2, w, s) for the listed levels (all when empty).
inline void write_det_csv(const JacobianField& jf, const std::string& path, const std::vector<int>& levels = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t,x1,x2,w,s\n";
  const auto& g = jf.grid();
  for (int k = 0; k < jf.levels(); ++k) {
    if (!levels.empty() && std::find(levels.begin(), levels.end(), k) == levels.end()) continue;
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        const auto& e = jf.at(k, i, j);
        out << pde::fmt(jf.time(k)) << ',' << pde::fmt(g.x(0, i)) << ',' << pde::fmt(g.x(1, j)) << ','
            << pde::fmt(e.w) << ',' << pde::fmt(e.s) << '\n';
      }
  }
}

inline nlohmann::json to_json(const RankDiagnostics& d) {
  return {{"tol_rel", d.tol_rel},
          {"max_fraction", d.max_fraction},
          {"overall_near_singular_fraction", d.overall},
          {"full_rank", d.full_rank},
          {"times", d.times},
          {"near_singular_fraction", d.near_singular_fraction}};
}

}  // namespace mcomp::jacobian

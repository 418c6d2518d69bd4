#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "mcomp/core/errors.hpp"
#include "mcomp/core/parallel.hpp"
#include "mcomp/model/diffusion_model.hpp"
#include "mcomp/pde/grid.hpp"
#include "mcomp/pde/value_field.hpp"

namespace mcomp::pde {

struct SolveOptions {
  int workers = 1;
  /// Warn when dt * |a12| / (h1 h2) exceeds this at some node.
  double cross_term_threshold = 1.0;
};

struct SolveStats {
  int steps = 0;
  double max_cross_ratio = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

/// Thomas elimination for lower/diag/upper rows; rhs is overwritten with the solution.
inline void thomas(std::vector<double>& lo, std::vector<double>& di, std::vector<double>& up, std::vector<double>& rhs,
                   int step) {
  const std::size_t n = di.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const double m = lo[i] / di[i - 1];
      di[i] -= m * up[i - 1];
      rhs[i] -= m * rhs[i - 1];
    }
    if (!(std::abs(di[i]) > 1e-300) || !std::isfinite(di[i])) {
      std::ostringstream os;
      os << "tridiagonal solve hit a zero pivot at row " << i << " in backward step " << step;
      throw SolverError(os.str(), step);
    }
  }
  rhs[n - 1] /= di[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - up[i] * rhs[i + 1]) / di[i];
}

/// Coefficients of the split operators at every node at one time.
struct NodeCoeffs {
  std::vector<double> c11, c22, c12, b1, b2, r;

  void resize(std::size_t n) {
    for (auto* v : {&c11, &c22, &c12, &b1, &b2, &r}) v->assign(n, 0.0);
  }
};

class BackwardStepper {
 public:
  BackwardStepper(const model::DiffusionModel& m, const SpaceTimeGrid& g, const SolveOptions& opt, SolveStats& stats)
      : m_(m), g_(g), opt_(opt), stats_(stats), n1_(g.n1), n2_(g.n2), h1_(g.h(0)), h2_(g.h(1)) {
    const std::size_t n = g.nodes();
    y0_.assign(n, 0.0);
    y1_.assign(n, 0.0);
    f0_.assign(n, 0.0);
    f1_.assign(n, 0.0);
    f2_.assign(n, 0.0);
    tmp_.assign(n, 0.0);
  }

  void coeffs(double t, NodeCoeffs& k) const {
    k.resize(g_.nodes());
    parallel_for(static_cast<std::size_t>(n1_), opt_.workers, [&](std::size_t i) {
      for (int j = 0; j < n2_; ++j) {
        const auto c = model::eval_coeffs(m_, t, g_.node(static_cast<int>(i), j));
        const std::size_t q = id(static_cast<int>(i), j);
        k.c11[q] = 0.5 * c.a[0][0];
        k.c22[q] = 0.5 * c.a[1][1];
        k.c12[q] = c.a[0][1];
        k.b1[q] = c.b[0];
        k.b2[q] = c.b[1];
        k.r[q] = c.r;
      }
    });
  }

  /// One step from u (at t_old, coefficients k_old) to out (at t_new = t_old - dt).
  ///
  /// theta < 1: Douglas predictor Y0 = U + dt F(U) followed by the two line
  /// stages. theta == 1: the split implicit form (I - dt A1)(I - dt A2) Y =
  /// U + dt A0 U, whose line factors have nonnegative inverses.
  void step(const double* u, double* out, const NodeCoeffs& k_old, const NodeCoeffs& k_new, double dt, double theta,
            int step_index) {
    const bool split = theta == 1.0;
    apply_split(u, k_old, f0_, f1_, f2_);
    for (int i = 1; i < n1_ - 1; ++i)
      for (int j = 1; j < n2_ - 1; ++j) {
        const std::size_t q = id(i, j);
        y0_[q] = split ? u[q] + dt * f0_[q] : u[q] + dt * (f0_[q] + f1_[q] + f2_[q]);
      }
    const bool cross = has_cross(k_old) || has_cross(k_new);
    implicit_stages(y0_, k_new, dt, theta, !split, step_index, out);
    if (!cross || theta == 0.0) return;
    // corrector: re-evaluate the explicit cross term on the predicted solution
    cross_term(out, k_new, tmp_);
    for (int i = 1; i < n1_ - 1; ++i)
      for (int j = 1; j < n2_ - 1; ++j) {
        const std::size_t q = id(i, j);
        y0_[q] += theta * dt * (tmp_[q] - f0_[q]);
      }
    implicit_stages(y0_, k_new, dt, theta, !split, step_index, out);
  }

  double cross_ratio(const NodeCoeffs& k, double dt) const {
    double worst = 0.0;
    for (double c : k.c12) worst = std::max(worst, std::abs(c));
    return dt * worst / (h1_ * h2_);
  }

 private:
  std::size_t id(int i, int j) const { return static_cast<std::size_t>(i) * n2_ + j; }

  static bool has_cross(const NodeCoeffs& k) {
    for (double c : k.c12)
      if (c != 0.0) return true;
    return false;
  }

  void cross_term(const double* u, const NodeCoeffs& k, std::vector<double>& f0) const {
    const double w = 1.0 / (4.0 * h1_ * h2_);
    for (int i = 1; i < n1_ - 1; ++i)
      for (int j = 1; j < n2_ - 1; ++j) {
        const std::size_t q = id(i, j);
        f0[q] = k.c12[q] * w * (u[id(i + 1, j + 1)] - u[id(i + 1, j - 1)] - u[id(i - 1, j + 1)] + u[id(i - 1, j - 1)]);
      }
  }

  void apply_split(const double* u, const NodeCoeffs& k, std::vector<double>& f0, std::vector<double>& f1,
                   std::vector<double>& f2) const {
    cross_term(u, k, f0);
    const double i11 = 1.0 / (h1_ * h1_), i22 = 1.0 / (h2_ * h2_);
    const double i1 = 0.5 / h1_, i2 = 0.5 / h2_;
    for (int i = 1; i < n1_ - 1; ++i)
      for (int j = 1; j < n2_ - 1; ++j) {
        const std::size_t q = id(i, j);
        const double uc = u[q];
        const double up1 = u[id(i + 1, j)], um1 = u[id(i - 1, j)];
        const double up2 = u[id(i, j + 1)], um2 = u[id(i, j - 1)];
        f1[q] = k.c11[q] * (up1 - 2.0 * uc + um1) * i11 + k.b1[q] * (up1 - um1) * i1 - 0.5 * k.r[q] * uc;
        f2[q] = k.c22[q] * (up2 - 2.0 * uc + um2) * i22 + k.b2[q] * (up2 - um2) * i2 - 0.5 * k.r[q] * uc;
      }
  }

  /// (I - theta dt A1) Y1 = Y0 - theta dt A1 U, then the same along x2, with
  /// zero second normal derivative imposed by eliminating the face unknowns.
  void implicit_stages(const std::vector<double>& y0, const NodeCoeffs& k, double dt, double theta, bool douglas,
                       int step_index, double* out) {
    const double td = theta * dt;
    const double back = douglas ? td : 0.0;
    // stage 1: lines along x1 for each interior j
    parallel_for(static_cast<std::size_t>(n2_ - 2), opt_.workers, [&](std::size_t jj) {
      const int j = static_cast<int>(jj) + 1;
      const int n = n1_ - 2;
      std::vector<double> lo(n), di(n), up(n), rhs(n);
      for (int p = 0; p < n; ++p) {
        const int i = p + 1;
        const std::size_t q = id(i, j);
        const double diff = k.c11[q] / (h1_ * h1_), adv = k.b1[q] / (2.0 * h1_);
        lo[p] = -td * (diff - adv);
        up[p] = -td * (diff + adv);
        di[p] = 1.0 - td * (-2.0 * diff - 0.5 * k.r[q]);
        rhs[p] = y0[q] - back * f1_[q];
      }
      di[0] += 2.0 * lo[0];
      up[0] -= lo[0];
      di[n - 1] += 2.0 * up[n - 1];
      lo[n - 1] -= up[n - 1];
      thomas(lo, di, up, rhs, step_index);
      for (int p = 0; p < n; ++p) y1_[id(p + 1, j)] = rhs[p];
    });
    // stage 2: lines along x2 for each interior i
    parallel_for(static_cast<std::size_t>(n1_ - 2), opt_.workers, [&](std::size_t ii) {
      const int i = static_cast<int>(ii) + 1;
      const int n = n2_ - 2;
      std::vector<double> lo(n), di(n), up(n), rhs(n);
      for (int p = 0; p < n; ++p) {
        const int j = p + 1;
        const std::size_t q = id(i, j);
        const double diff = k.c22[q] / (h2_ * h2_), adv = k.b2[q] / (2.0 * h2_);
        lo[p] = -td * (diff - adv);
        up[p] = -td * (diff + adv);
        di[p] = 1.0 - td * (-2.0 * diff - 0.5 * k.r[q]);
        rhs[p] = y1_[q] - back * f2_[q];
      }
      di[0] += 2.0 * lo[0];
      up[0] -= lo[0];
      di[n - 1] += 2.0 * up[n - 1];
      lo[n - 1] -= up[n - 1];
      thomas(lo, di, up, rhs, step_index);
      for (int p = 0; p < n; ++p) out[id(i, p + 1)] = rhs[p];
    });
    extrapolate_faces(out);
  }

  void extrapolate_faces(double* u) const {
    for (int j = 1; j < n2_ - 1; ++j) {
      u[id(0, j)] = 2.0 * u[id(1, j)] - u[id(2, j)];
      u[id(n1_ - 1, j)] = 2.0 * u[id(n1_ - 2, j)] - u[id(n1_ - 3, j)];
    }
    for (int i = 0; i < n1_; ++i) {
      u[id(i, 0)] = 2.0 * u[id(i, 1)] - u[id(i, 2)];
      u[id(i, n2_ - 1)] = 2.0 * u[id(i, n2_ - 2)] - u[id(i, n2_ - 3)];
    }
  }

  const model::DiffusionModel& m_;
  const SpaceTimeGrid& g_;
  const SolveOptions& opt_;
  SolveStats& stats_;
  int n1_, n2_;
  double h1_, h2_;
  std::vector<double> y0_, y1_, f0_, f1_, f2_, tmp_;
};

}  // namespace detail

/// Solves d_t v + (L^X - r) v = 0 on grid.box x [0, 1] backward from v(1, .) = terminal.
///
/// Each step treats the x1 and x2 parts theta-implicitly by line solves and
/// the cross-derivative term explicitly, followed by one corrector pass that
/// re-evaluates the cross term on the predicted solution. The first
/// ceil(rannacher_steps / 2) intervals are replaced by rannacher_steps
/// fully implicit half steps. Face values satisfy a zero second normal
/// derivative. Needs at least 4 nodes per axis.
inline ValueField solve_backward(const model::DiffusionModel& m, const SpaceTimeGrid& grid, const model::Payoff& terminal,
                                 const SolveOptions& opt = {}, SolveStats* stats_out = nullptr) {
  grid.check();
  if (grid.n1 < 4 || grid.n2 < 4) throw GridError("solve_backward needs at least 4 nodes per axis");
  SolveStats stats;
  ValueField v = ValueField::on_grid(grid);
  double* top = v.level_data(grid.n_t);
  for (int i = 0; i < grid.n1; ++i)
    for (int j = 0; j < grid.n2; ++j) top[static_cast<std::size_t>(i) * grid.n2 + j] = terminal(grid.node(i, j));

  detail::BackwardStepper stepper(m, grid, opt, stats);
  detail::NodeCoeffs k_old, k_new, k_mid;
  stepper.coeffs(1.0, k_old);
  const int startup_intervals = std::min(grid.n_t, (grid.rannacher_steps + 1) / 2);
  const double dt = grid.dt();
  std::vector<double> scratch(grid.nodes());
  for (int level = grid.n_t; level > 0; --level) {
    const double t_old = grid.t(level), t_new = grid.t(level - 1);
    stepper.coeffs(t_new, k_new);
    const int interval = grid.n_t - level;
    stats.max_cross_ratio = std::max(stats.max_cross_ratio, stepper.cross_ratio(k_new, dt));
    if (interval < startup_intervals) {
      // two fully implicit half steps per startup interval (the last may be single if rannacher_steps is odd)
      const int halves = std::min(2, grid.rannacher_steps - 2 * interval);
      if (halves == 2) {
        const double t_mid = 0.5 * (t_old + t_new);
        stepper.coeffs(t_mid, k_mid);
        stepper.step(v.level_data(level), scratch.data(), k_old, k_mid, 0.5 * dt, 1.0, interval);
        stepper.step(scratch.data(), v.level_data(level - 1), k_mid, k_new, 0.5 * dt, 1.0, interval);
      } else {
        stepper.step(v.level_data(level), v.level_data(level - 1), k_old, k_new, dt, 1.0, interval);
      }
    } else {
      stepper.step(v.level_data(level), v.level_data(level - 1), k_old, k_new, dt, grid.theta, interval);
    }
    std::swap(k_old, k_new);
    ++stats.steps;
  }
  if (stats.max_cross_ratio > opt.cross_term_threshold) {
    std::ostringstream os;
    os << "explicit cross term: dt*|a12|/(h1*h2) reaches " << stats.max_cross_ratio << " (threshold "
       << opt.cross_term_threshold << ")";
    stats.warnings.push_back(os.str());
  }
  if (stats_out) *stats_out = std::move(stats);
  return v;
}

}  // namespace mcomp::pde

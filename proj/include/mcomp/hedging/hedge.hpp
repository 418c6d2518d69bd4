#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcomp/hedging/paths.hpp"
#include "mcomp/model/diffusion_model.hpp"
#include "mcomp/pde/export.hpp"
#include "mcomp/pde/value_field.hpp"

namespace mcomp::hedging {

/// Node gradients of a solved field, interpolated bilinearly in x and
/// linearly in t. Points outside the box are clipped to it.
class GradientField {
 public:
  explicit GradientField(const pde::ValueField& v) : d1_(v.derivative_field(0)), d2_(v.derivative_field(1)) {}

  Vec2 at(double t, const Vec2& x) const { return {d1_.interpolate(t, x), d2_.interpolate(t, x)}; }

  bool outside(const Vec2& x) const { return !d1_.grid().box.contains(x); }

 private:
  pde::ValueField d1_, d2_;
};

/// Largest over smallest singular value of a 2 x 2 matrix after scaling its
/// rows to unit length.
inline double condition_number(Mat2 M) {
  for (auto& row : M) {
    const double n = std::hypot(row[0], row[1]);
    if (n == 0.0) return std::numeric_limits<double>::infinity();
    row[0] /= n, row[1] /= n;
  }
  const double f2 = M[0][0] * M[0][0] + M[0][1] * M[0][1] + M[1][0] * M[1][0] + M[1][1] * M[1][1];
  const double d = std::abs(det(M));
  if (d == 0.0) return std::numeric_limits<double>::infinity();
  const double disc = std::sqrt(std::max(0.0, f2 * f2 - 4.0 * d * d));
  const double smax2 = 0.5 * (f2 + disc), smin2 = 0.5 * (f2 - disc);
  return smin2 > 0.0 ? std::sqrt(smax2 / smin2) : smax2 / d;
}

/// H with H^T (discount J sigma) = u_grad^T sigma by a direct 2 x 2 solve.
/// Returns nullopt when |det(J sigma)| <= tol_rel |row 1| |row 2|.
inline std::optional<Vec2> hedge_integrand(const Vec2& u_grad, const Mat2& J, const Mat2& sigma, double discount,
                                           double tol_rel = 1e-6) {
  const Mat2 M = discount * (J * sigma);
  const double d = det(M);
  const double scale = norm(Vec2{M[0][0], M[0][1]}) * norm(Vec2{M[1][0], M[1][1]});
  if (!(std::abs(d) > tol_rel * scale)) return std::nullopt;
  const Vec2 c = row_times(u_grad, sigma);
  // M^T H = c
  return Vec2{(c[0] * M[1][1] - c[1] * M[1][0]) / d, (M[0][0] * c[1] - M[0][1] * c[0]) / d};
}

/// h = f(1, .), the claim whose discounted payoff is the forward asset at t = 1.
inline model::Payoff forward_payoff(const model::DiffusionModel& m) {
  const auto f = m.forward;
  return model::Payoff{"forward", [f](const Vec2& x) { return f.eval(1.0, x); },
                       [f](const Vec2& x) {
                         const Jet j = f.jet(1.0, x);
                         return Vec2{j.x[0], j.x[1]};
                       },
                       std::nullopt, std::max(1.0, std::abs(f.eval(0.0, m.x0)))};
}

struct HedgeOptions {
  double tol_rel = 1e-6;
  double fallback_bound = 1e-3;
  double clip_warn_fraction = 0.01;
  bool keep_path_errors = true;
  int workers = 1;
};

struct ConvergenceRow {
  int n_steps = 0;
  double rmse = 0.0;
  double mean_abs_error = 0.0;
  long fallback_events = 0;
  double fallback_fraction = 0.0;
};

struct HedgeReport {
  std::string target;
  int n_paths = 0;
  int invalid_paths = 0;
  int n_steps = 0;
  double initial_value = 0.0;
  std::vector<double> errors;  // e_i = M_1 - h(X_1) D_1, invalid paths excluded
  double rmse = 0.0;
  double mean_abs_error = 0.0;
  double mean_error = 0.0;
  long fallback_events = 0;
  long path_steps = 0;
  double fallback_fraction = 0.0;
  double fallback_bound = 1e-3;
  bool fallback_within_bound = true;
  double condition_max = 0.0;
  double condition_mean_log10 = 0.0;
  long lookups = 0;
  long clipped_lookups = 0;
  double clip_fraction = 0.0;
  std::vector<std::string> warnings;
  std::vector<ConvergenceRow> convergence;
};

namespace detail {

struct PathOutcome {
  bool valid = false;
  double error = 0.0;
  long fallbacks = 0;
  long steps = 0;
  double cond_max = 0.0;
  double cond_log_sum = 0.0;
  long cond_count = 0;
  long lookups = 0;
  long clipped = 0;
};

struct HedgeContext {
  const model::DiffusionModel& m;
  const model::Payoff& target;
  const pde::ValueField& v;
  const pde::ValueField& u;
  const GradientField& gv;
  const GradientField& gu;
  double tol_rel;
};

/// Replicates the target along one path given its states and increments.
inline PathOutcome hedge_path(const HedgeContext& c, int n, const Vec2* x, const Vec2* dw, const double* D) {
  PathOutcome out;
  out.valid = true;
  const double dt = 1.0 / n;
  auto sb = [&](int k) {
    if (k == n) return D[n] * c.m.payoff(x[n]);
    ++out.lookups;
    if (c.gv.outside(x[k])) ++out.clipped;
    return D[k] * c.v.interpolate(k * dt, x[k]);
  };
  double M = c.u.interpolate(0.0, x[0]);
  double sb_k = sb(0);
  Vec2 held{0.0, 0.0};
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    const auto coeffs = model::eval_coeffs(c.m, t, x[k]);
    const Jet fj = c.m.forward.jet(t, x[k]);
    const Vec2 grad_f{fj.x[0], fj.x[1]};
    const Mat2 J = from_rows(grad_f, c.gv.at(t, x[k]));
    const Vec2 gu = c.gu.at(t, x[k]);
    const auto H = hedge_integrand(Vec2{D[k] * gu[0], D[k] * gu[1]}, J, coeffs.sigma, D[k], c.tol_rel);
    if (H) {
      held = *H;
      const double cond = condition_number(J * coeffs.sigma);
      out.cond_max = std::max(out.cond_max, cond);
      out.cond_log_sum += std::log10(cond);
      ++out.cond_count;
    } else {
      ++out.fallbacks;
    }
    ++out.steps;
    const double dsf = D[k] * dot(row_times(grad_f, coeffs.sigma), dw[k]);
    const double sb_next = sb(k + 1);
    M += held[0] * dsf + held[1] * (sb_next - sb_k);
    sb_k = sb_next;
  }
  out.error = M - c.target(x[n]) * D[n];
  return out;
}

inline void accumulate(HedgeReport& rep, const std::vector<PathOutcome>& outcomes, bool keep_errors) {
  double se = 0.0, sa = 0.0, s = 0.0, log_sum = 0.0;
  long cond_count = 0;
  for (const auto& o : outcomes) {
    if (!o.valid) {
      ++rep.invalid_paths;
      continue;
    }
    if (keep_errors) rep.errors.push_back(o.error);
    se += o.error * o.error;
    sa += std::abs(o.error);
    s += o.error;
    rep.fallback_events += o.fallbacks;
    rep.path_steps += o.steps;
    rep.condition_max = std::max(rep.condition_max, o.cond_max);
    log_sum += o.cond_log_sum;
    cond_count += o.cond_count;
    rep.lookups += o.lookups;
    rep.clipped_lookups += o.clipped;
  }
  const double n = static_cast<double>(outcomes.size() - rep.invalid_paths);
  if (n > 0) {
    rep.rmse = std::sqrt(se / n);
    rep.mean_abs_error = sa / n;
    rep.mean_error = s / n;
  }
  rep.condition_mean_log10 = cond_count ? log_sum / cond_count : 0.0;
  rep.fallback_fraction = rep.path_steps ? static_cast<double>(rep.fallback_events) / rep.path_steps : 0.0;
  rep.fallback_within_bound = rep.fallback_fraction <= rep.fallback_bound;
  rep.clip_fraction = rep.lookups ? static_cast<double>(rep.clipped_lookups) / rep.lookups : 0.0;
}

inline void finish(HedgeReport& rep, const HedgeOptions& opt) {
  if (rep.clip_fraction > opt.clip_warn_fraction)
    rep.warnings.push_back("clipped grid lookups (" + pde::fmt(rep.clip_fraction) + ") exceed the warning fraction");
  if (!rep.fallback_within_bound) rep.warnings.push_back("fallback fraction exceeds bound");
  if (rep.invalid_paths > 0)
    rep.warnings.push_back(std::to_string(rep.invalid_paths) + " paths had non-finite coefficients and were excluded");
}

inline void check_fields(const pde::ValueField& v, const pde::ValueField& u) {
  if (v.levels() < 2 || u.levels() < 2) throw GridError("replicate_claim needs solved fields with >= 2 levels");
}

}  // namespace detail

/// S^F by its defining Euler stochastic integral from S^F_0 = f(0, X_0), and
/// S^B_k = v(t_k, X_k) D_k with S^B at t = 1 equal to g(X_1) D_1.
struct AssetPaths {
  int n_paths = 0;
  int n_steps = 0;
  std::vector<double> sf;  // (n_steps + 1) per path
  std::vector<double> sb;
  long lookups = 0;
  long clipped_lookups = 0;
  std::vector<std::string> warnings;

  double SF(int p, int k) const { return sf[static_cast<std::size_t>(p) * (n_steps + 1) + k]; }
  double SB(int p, int k) const { return sb[static_cast<std::size_t>(p) * (n_steps + 1) + k]; }
};

inline AssetPaths evolve_assets(const model::DiffusionModel& m, const pde::ValueField& v, const PathBundle& paths,
                                double clip_warn_fraction = 0.01) {
  AssetPaths a;
  a.n_paths = paths.n_paths;
  a.n_steps = paths.n_steps;
  const int n = paths.n_steps;
  a.sf.assign(static_cast<std::size_t>(paths.n_paths) * (n + 1), 0.0);
  a.sb.assign(a.sf.size(), 0.0);
  const double dt = 1.0 / n;
  const Box& box = v.grid().box;
  for (int p = 0; p < paths.n_paths; ++p) {
    if (!paths.valid[p]) continue;
    double* sf = a.sf.data() + static_cast<std::size_t>(p) * (n + 1);
    double* sb = a.sb.data() + static_cast<std::size_t>(p) * (n + 1);
    sf[0] = m.forward.eval(0.0, paths.X(p, 0));
    for (int k = 0; k <= n; ++k) {
      const Vec2& x = paths.X(p, k);
      if (k == n) {
        sb[k] = paths.D(p, k) * m.payoff(x);
      } else {
        ++a.lookups;
        if (!box.contains(x)) ++a.clipped_lookups;
        sb[k] = paths.D(p, k) * v.interpolate(k * dt, x);
        const auto c = model::eval_coeffs(m, k * dt, x);
        const Jet fj = m.forward.jet(k * dt, x);
        sf[k + 1] = sf[k] + paths.D(p, k) * dot(row_times(Vec2{fj.x[0], fj.x[1]}, c.sigma), paths.dW(p, k));
      }
    }
  }
  if (a.lookups && static_cast<double>(a.clipped_lookups) / a.lookups > clip_warn_fraction)
    a.warnings.push_back("more than 1% of grid lookups were clipped to the box");
  return a;
}

/// Hedge of `target` with the forward asset and the claim g (price field v)
/// along a stored bundle. u is the price field of the target on any grid.
inline HedgeReport replicate_claim(const model::DiffusionModel& m, const model::Payoff& target, const pde::ValueField& v,
                                   const pde::ValueField& u, const PathBundle& paths, const HedgeOptions& opt = {}) {
  detail::check_fields(v, u);
  const GradientField gv(v), gu(u);
  const detail::HedgeContext ctx{m, target, v, u, gv, gu, opt.tol_rel};
  std::vector<detail::PathOutcome> outcomes(paths.n_paths);
  parallel_for(static_cast<std::size_t>(paths.n_paths), opt.workers, [&](std::size_t p) {
    if (!paths.valid[p]) return;
    const std::size_t n = static_cast<std::size_t>(paths.n_steps);
    outcomes[p] = detail::hedge_path(ctx, paths.n_steps, paths.x.data() + p * (n + 1), paths.dw.data() + p * n,
                                     paths.discount.data() + p * (n + 1));
  });
  HedgeReport rep;
  rep.target = target.name;
  rep.n_paths = paths.n_paths;
  rep.n_steps = paths.n_steps;
  rep.fallback_bound = opt.fallback_bound;
  rep.initial_value = u.interpolate(0.0, m.x0);
  detail::accumulate(rep, outcomes, opt.keep_path_errors);
  rep.convergence.push_back({rep.n_steps, rep.rmse, rep.mean_abs_error, rep.fallback_events, rep.fallback_fraction});
  detail::finish(rep, opt);
  return rep;
}

struct ReplicationPlan {
  int n_paths = 10000;
  std::uint64_t seed = 1;
  bool antithetic = false;
  /// Each level must divide the largest; increments of coarser levels are
  /// sums of the finest ones, so every level sees the same Brownian paths.
  std::vector<int> step_levels{64, 128, 256, 512};
};

/// Step-halving convergence study. Paths are generated per path on the finest
/// level and never stored; the headline statistics are those of the finest level.
inline HedgeReport replicate_convergence(const model::DiffusionModel& m, const model::Payoff& target,
                                         const pde::ValueField& v, const pde::ValueField& u,
                                         const ReplicationPlan& plan, const HedgeOptions& opt = {}) {
  detail::check_fields(v, u);
  if (plan.step_levels.empty() || plan.n_paths < 1) throw std::invalid_argument("replicate_convergence: empty plan");
  std::vector<int> levels = plan.step_levels;
  std::sort(levels.begin(), levels.end());
  const int fine = levels.back();
  for (int n : levels)
    if (n < 1 || fine % n != 0) throw std::invalid_argument("replicate_convergence: levels must divide the finest");
  const GradientField gv(v), gu(u);
  const detail::HedgeContext ctx{m, target, v, u, gv, gu, opt.tol_rel};
  const Philox4x32 gen(plan.seed);
  std::vector<std::vector<detail::PathOutcome>> outcomes(levels.size(),
                                                         std::vector<detail::PathOutcome>(plan.n_paths));
  parallel_for(static_cast<std::size_t>(plan.n_paths), opt.workers, [&](std::size_t p) {
    std::vector<Vec2> dw_fine(fine);
    detail::increments(gen, p, fine, plan.antithetic, dw_fine.data());
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const int n = levels[l];
      const auto dw = detail::coarsen(dw_fine, fine / n);
      std::vector<Vec2> x(n + 1);
      std::vector<double> D(n + 1);
      if (!detail::euler(m, n, dw.data(), x.data(), D.data())) continue;
      outcomes[l][p] = detail::hedge_path(ctx, n, x.data(), dw.data(), D.data());
    }
  });
  std::vector<ConvergenceRow> table;
  HedgeReport rep;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    HedgeReport level;
    level.fallback_bound = opt.fallback_bound;
    const bool last = l + 1 == levels.size();
    detail::accumulate(level, outcomes[l], last && opt.keep_path_errors);
    table.push_back({levels[l], level.rmse, level.mean_abs_error, level.fallback_events, level.fallback_fraction});
    if (last) rep = std::move(level);
  }
  rep.convergence = std::move(table);
  rep.target = target.name;
  rep.n_paths = plan.n_paths;
  rep.n_steps = fine;
  rep.initial_value = u.interpolate(0.0, m.x0);
  detail::finish(rep, opt);
  return rep;
}

/// RMSE strictly decreasing along the convergence table.
inline bool strictly_decreasing(const std::vector<ConvergenceRow>& table) {
  for (std::size_t i = 1; i < table.size(); ++i)
    if (!(table[i].rmse < table[i - 1].rmse)) return false;
  return true;
}

inline nlohmann::json to_json(const HedgeReport& r) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& row : r.convergence)
    table.push_back({{"n_steps", row.n_steps},
                     {"rmse", row.rmse},
                     {"mean_abs_error", row.mean_abs_error},
                     {"fallback_events", row.fallback_events},
                     {"fallback_fraction", row.fallback_fraction}});
  return {{"target", r.target},
          {"n_paths", r.n_paths},
          {"invalid_paths", r.invalid_paths},
          {"n_steps", r.n_steps},
          {"initial_value", r.initial_value},
          {"rmse", r.rmse},
          {"mean_abs_error", r.mean_abs_error},
          {"mean_error", r.mean_error},
          {"fallback_events", r.fallback_events},
          {"path_steps", r.path_steps},
          {"fallback_fraction", r.fallback_fraction},
          {"fallback_bound", r.fallback_bound},
          {"fallback_within_bound", r.fallback_within_bound},
          {"condition_max", r.condition_max},
          {"condition_mean_log10", r.condition_mean_log10},
          {"lookups", r.lookups},
          {"clipped_lookups", r.clipped_lookups},
          {"clip_fraction", r.clip_fraction},
          {"rmse_strictly_decreasing", strictly_decreasing(r.convergence)},
          {"warnings", r.warnings},
          {"convergence", table}};
}

inline void write_convergence_csv(const HedgeReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "n_steps,rmse,fallback_fraction\n";
  for (const auto& row : r.convergence)
    out << row.n_steps << ',' << pde::fmt(row.rmse) << ',' << pde::fmt(row.fallback_fraction) << '\n';
}

inline void write_errors_csv(const HedgeReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "path,terminal_error\n";
  for (std::size_t i = 0; i < r.errors.size(); ++i) out << i << ',' << pde::fmt(r.errors[i]) << '\n';
}

}  // namespace mcomp::hedging

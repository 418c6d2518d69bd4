#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcomp/core/errors.hpp"
#include "mcomp/core/parallel.hpp"
#include "mcomp/model/coefficient_field.hpp"
#include "mcomp/model/diffusion_model.hpp"
#include "mcomp/model/report.hpp"

namespace mcomp::validation {

/// HEURISTIC. Estimates the radius of convergence in t of a coefficient from
/// Richardson-extrapolated central divided differences. Finitely many
/// evaluations cannot certify analyticity; results never gate a verdict.
struct ProbeOptions {
  int order = 6;
  /// Initial coarse step; the fine step is h / 2. The step is halved while
  /// D(h) and D(h/2) disagree, up to max_halvings times.
  double h = 0.2;
  int max_halvings = 10;
  /// Allowed |D(h/2) - D(h)| / |D| for an accepted derivative.
  double richardson_tol = 0.25;
  /// Cancellation sum|c_j f_j| / |sum c_j f_j| at or above 10^digits marks
  /// the divided difference ill-conditioned.
  double max_digits_lost = 10.0;
  /// Estimated radius below this raises the small-radius flag.
  double min_radius = 0.1;
  int workers = 1;
};

struct ProbeResult {
  double t = 0.0;
  Vec2 x{};
  /// Index k holds the extrapolated k-th t-derivative (index 0 the value).
  std::vector<double> derivatives;
  std::vector<double> richardson_rel;
  std::vector<double> digits_lost;
  /// Coarse step accepted at each order.
  std::vector<double> step;
  /// (k! / |d_k|)^{1/k}; +inf where d_k vanishes.
  std::vector<double> root_ratio;
  double radius = std::numeric_limits<double>::infinity();
  bool reliable = true;
  bool small_radius = false;
  std::string note;
};

struct ProbeReport {
  std::string field;
  int order = 0;
  std::vector<ProbeResult> results;

  bool any_flag() const {
    for (const auto& r : results)
      if (!r.reliable || r.small_radius) return true;
    return false;
  }
};

namespace detail {

struct Difference {
  double value = 0.0;
  double abs_sum = 0.0;
  bool exact_zero = false;
};

/// k-th central difference with step h: sum_j (-1)^j C(k, j) f(t + (k/2 - j) h) / h^k.
template <class F>
Difference central_difference(F&& f, double t, int k, double h) {
  Difference d;
  double binom = 1.0;
  double first = 0.0;
  bool all_equal = true;
  for (int j = 0; j <= k; ++j) {
    const double v = f(t + (0.5 * k - j) * h);
    if (j == 0) first = v;
    else if (v != first) all_equal = false;
    const double c = (j % 2 == 0 ? 1.0 : -1.0) * binom;
    d.value += c * v;
    d.abs_sum += std::abs(c * v);
    binom = binom * (k - j) / (j + 1);
  }
  const double hk = std::pow(h, k);
  d.value /= hk;
  d.abs_sum /= hk;
  d.exact_zero = all_equal && k > 0;
  if (d.exact_zero) d.value = 0.0;
  return d;
}

/// Least-squares fit of log r_k = a + b / k; returns exp(a).
inline double fit_radius(const std::vector<int>& ks, const std::vector<double>& rs) {
  const std::size_t n = ks.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 1.0 / ks[i], y = std::log(rs[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (n < 2 || den <= 0.0) return rs.back();
  const double b = (n * sxy - sx * sy) / den;
  return std::exp((sy - b * sx) / n);
}

}  // namespace detail

/// Probe a scalar function of t at one point.
template <class F>
ProbeResult probe_time_function(F&& f, double t, const ProbeOptions& opt = {}) {
  if (opt.order < 1 || opt.order > 8) throw ModelError("time_analyticity_probe: order must be in [1, 8]");
  if (!(opt.h > 0.0)) throw ModelError("time_analyticity_probe: h must be > 0");
  ProbeResult r;
  r.t = t;
  r.derivatives.assign(opt.order + 1, 0.0);
  r.richardson_rel.assign(opt.order + 1, 0.0);
  r.digits_lost.assign(opt.order + 1, 0.0);
  r.step.assign(opt.order + 1, 0.0);
  r.root_ratio.assign(opt.order + 1, std::numeric_limits<double>::infinity());
  r.derivatives[0] = f(t);
  if (!std::isfinite(r.derivatives[0])) {
    r.reliable = false;
    r.note = "non-finite value";
    return r;
  }

  std::vector<int> ks;
  std::vector<double> rs;
  double kfact = 1.0;
  for (int k = 1; k <= opt.order; ++k) {
    kfact *= k;
    double h = opt.h, ext = 0.0;
    bool accepted = false, zero = false, ill = false;
    for (int halving = 0; halving <= opt.max_halvings; ++halving, h *= 0.5) {
      const auto c = detail::central_difference(f, t, k, h);
      const auto d = detail::central_difference(f, t, k, 0.5 * h);
      r.step[k] = h;
      if (c.exact_zero && d.exact_zero) {
        zero = true;
        break;
      }
      ext = d.value + (d.value - c.value) / 3.0;
      const double lost =
          d.value != 0.0 ? std::log10(d.abs_sum / std::abs(d.value)) : std::numeric_limits<double>::infinity();
      r.digits_lost[k] = lost;
      r.richardson_rel[k] = std::abs(d.value - c.value) / std::max(std::abs(ext), std::numeric_limits<double>::min());
      if (!std::isfinite(ext)) continue;
      if (lost >= opt.max_digits_lost) {
        ill = true;
        break;
      }
      if (r.richardson_rel[k] <= opt.richardson_tol) {
        accepted = true;
        break;
      }
    }
    if (zero) continue;
    r.derivatives[k] = ext;
    if (!accepted) {
      r.reliable = false;
      if (r.note.empty())
        r.note = (ill ? "ill-conditioned divided difference at order " : "Richardson disagreement at order ") +
                 std::to_string(k);
      continue;
    }
    if (ext == 0.0) continue;
    r.root_ratio[k] = std::pow(kfact / std::abs(ext), 1.0 / k);
    ks.push_back(k);
    rs.push_back(r.root_ratio[k]);
  }
  if (!ks.empty()) r.radius = std::min(detail::fit_radius(ks, rs), rs.back());
  r.small_radius = r.radius < opt.min_radius;
  return r;
}

/// Probes `field` along t at each (t, x) with t in t_grid and x in xs.
inline ProbeReport time_analyticity_probe(const model::CoefficientField& field, const std::vector<double>& t_grid,
                                          const std::vector<Vec2>& xs = {Vec2{0.0, 0.0}}, const ProbeOptions& opt = {}) {
  if (t_grid.empty() || xs.empty()) throw ModelError("time_analyticity_probe: empty probe set");
  ProbeReport rep;
  rep.field = field.name();
  rep.order = opt.order;
  rep.results.resize(t_grid.size() * xs.size());
  parallel_for(rep.results.size(), opt.workers, [&](std::size_t i) {
    const double t = t_grid[i / xs.size()];
    const Vec2 x = xs[i % xs.size()];
    auto r = probe_time_function([&](double s) { return field.eval(s, x); }, t, opt);
    r.x = x;
    rep.results[i] = std::move(r);
  });
  return rep;
}

/// Heuristic rows: one per probe point, passing when reliable and not small.
inline std::vector<CheckRow> probe_rows(const ProbeReport& rep, const std::string& prefix, const ProbeOptions& opt = {}) {
  std::vector<CheckRow> rows;
  for (const auto& r : rep.results) {
    char where[96];
    std::snprintf(where, sizeof where, ".t=%g.x=(%g,%g)", r.t, r.x[0], r.x[1]);
    const std::string id = prefix + ".time_analyticity." + rep.field + where;
    auto row = make_row(id, "HEURISTIC estimated radius of convergence in t >= min_radius", r.radius, opt.min_radius);
    row.heuristic = true;
    row.passed = r.reliable && !r.small_radius;
    row.witness = Witness{r.t, r.x};
    row.note = r.reliable ? (r.small_radius ? "small radius" : "") : "unreliable: " + r.note;
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Probes every coefficient of the model (b, sigma, r, f) and appends the
/// heuristic rows to `report`.
inline void append_time_analyticity(ValidationReport& report, const model::DiffusionModel& m,
                                    const std::vector<double>& t_grid, const std::vector<Vec2>& xs,
                                    const ProbeOptions& opt = {}) {
  auto add = [&](const model::CoefficientField& c, const std::string& label) {
    const auto rep = time_analyticity_probe(c, t_grid, xs, opt);
    for (auto& row : probe_rows(rep, label, opt)) report.rows.push_back(std::move(row));
  };
  add(m.drift[0], "plausibility.b1");
  add(m.drift[1], "plausibility.b2");
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) add(m.vol[i][j], "plausibility.sigma" + std::to_string(i + 1) + std::to_string(j + 1));
  add(m.rate, "plausibility.r");
  add(m.forward, "plausibility.f");
}

inline nlohmann::json to_json(const ProbeResult& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf"); };
  nlohmann::json ratios = nlohmann::json::array();
  for (std::size_t k = 1; k < r.root_ratio.size(); ++k) ratios.push_back(num(r.root_ratio[k]));
  nlohmann::json j{{"t", r.t},           {"x1", r.x[0]},
                   {"x2", r.x[1]},       {"derivatives", r.derivatives},
                   {"digits_lost", r.digits_lost}, {"richardson_rel", r.richardson_rel},
                   {"step", r.step},
                   {"root_ratio", ratios}, {"radius", num(r.radius)},
                   {"reliable", r.reliable}, {"small_radius", r.small_radius}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

inline nlohmann::json to_json(const ProbeReport& rep) {
  nlohmann::json res = nlohmann::json::array();
  for (const auto& r : rep.results) res.push_back(to_json(r));
  return {{"label", "HEURISTIC"}, {"field", rep.field}, {"order", rep.order}, {"results", res}};
}

}  // namespace mcomp::validation

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcomp/core/errors.hpp"
#include "mcomp/model/report.hpp"

namespace mcomp::validation {

/// Constants of the analytic-composition envelope:
///   |g^(k)(y)| <= D k! / (r + eps |y|)^k,
///   delta |C(x)| k! / R^k <= |d^k f/dt^k (t, x)| <= |C(x)| k! / R^k.
struct AnalyticEnvelope {
  double D = 1.0;
  double r = 1.0;
  double epsilon = 1.0;
  double delta = 1.0;
  double R = 1.0;
  std::function<double(double)> C = [](double) { return 1.0; };

  void check() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ModelError(std::string("AnalyticEnvelope: ") + what + " must be > 0");
    };
    positive(D, "D");
    positive(r, "r");
    positive(epsilon, "epsilon");
    positive(delta, "delta");
    positive(R, "R");
    if (!C) throw ModelError("AnalyticEnvelope: C is empty");
  }
};

struct FdbBound {
  double M = 0.0;
  double L = 0.0;

  /// M k! / L^k.
  double at(int k) const { return M * std::tgamma(k + 1.0) / std::pow(L, k); }
};

/// Derivative bound of the composite h = g o f: |d^k h/dt^k| <= M k!/L^k.
inline FdbBound faa_di_bruno_bound(const AnalyticEnvelope& env) {
  env.check();
  const double ed = env.epsilon * env.delta;
  return {env.D / (1.0 + ed), env.R * ed / (1.0 + 2.0 * ed)};
}

/// A composite test pair with closed-form derivatives. `g(k, y)` is the k-th
/// derivative of g, `f(k, t, x)` and `h(k, t, x)` the k-th t-derivatives of f
/// and of g o f (k = 0 gives the value).
struct CompositePair {
  std::string name;
  std::function<double(int, double)> g;
  std::function<double(int, double, double)> f;
  std::function<double(int, double, double)> h;
  double t_lo = 0.0, t_hi = 1.0;
  double x_lo = -1.0, x_hi = 1.0;
  int k_avail = 6;
};

namespace detail {

inline double factorial(int k) { return std::tgamma(k + 1.0); }

/// d^k/dt^k of arctan(u), u = e^{-t} x, as P_k(u) / (1 + u^2)^k.
/// P_1 = -u and P_{k+1} = -u (P_k' (1 + u^2) - 2 k u P_k).
inline std::vector<std::vector<double>> arctan_exp_polys(int k_max) {
  std::vector<std::vector<double>> P(k_max + 1);
  if (k_max < 1) return P;
  P[1] = {0.0, -1.0};
  for (int k = 1; k < k_max; ++k) {
    const auto& p = P[k];
    std::vector<double> q(p.size() + 2, 0.0);
    for (std::size_t i = 1; i < p.size(); ++i) {
      const double d = static_cast<double>(i) * p[i];  // coefficient of u^{i-1} in P'
      q[i] -= d;                                       // -u * P'
      q[i + 2] -= d;                                   // -u * u^2 P'
    }
    for (std::size_t i = 0; i < p.size(); ++i) q[i + 2] += 2.0 * k * p[i];  // + 2k u^2 P
    while (q.size() > 1 && q.back() == 0.0) q.pop_back();
    P[k + 1] = std::move(q);
  }
  return P;
}

inline double horner(const std::vector<double>& p, double u) {
  double s = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) s = s * u + *it;
  return s;
}

inline double arctan_derivative(int k, double y) {
  // d^k/dy^k arctan(y) = (k-1)! sin(k (atan(y) + pi/2)) / (1 + y^2)^{k/2}
  if (k == 0) return std::atan(y);
  const double th = std::atan(y) + std::numbers::pi / 2.0;
  return factorial(k - 1) * std::sin(k * th) / std::pow(1.0 + y * y, 0.5 * k);
}

}  // namespace detail

/// g = arctan, f(t, x) = e^{-t} x on t in (0, 1), |x| <= x_max.
inline CompositePair arctan_exp_pair(double x_max = 10.0, int k_max = 6) {
  auto polys = std::make_shared<std::vector<std::vector<double>>>(detail::arctan_exp_polys(k_max));
  CompositePair p;
  p.name = "arctan(exp(-t) x)";
  p.g = [](int k, double y) { return detail::arctan_derivative(k, y); };
  p.f = [](int k, double t, double x) { return (k % 2 == 0 ? 1.0 : -1.0) * std::exp(-t) * x; };
  p.h = [polys](int k, double t, double x) {
    const double u = std::exp(-t) * x;
    if (k == 0) return std::atan(u);
    if (k >= static_cast<int>(polys->size())) throw CapabilityError("arctan_exp_pair: order above registered table");
    return detail::horner((*polys)[k], u) / std::pow(1.0 + u * u, k);
  };
  p.x_lo = -x_max;
  p.x_hi = x_max;
  p.k_avail = k_max;
  return p;
}

/// g = identity, f(t, x) = e^{-t} x, so h = f.
inline CompositePair identity_exp_pair(double x_max = 10.0) {
  CompositePair p;
  p.name = "id(exp(-t) x)";
  p.g = [](int k, double y) { return k == 0 ? y : (k == 1 ? 1.0 : 0.0); };
  p.f = [](int k, double t, double x) { return (k % 2 == 0 ? 1.0 : -1.0) * std::exp(-t) * x; };
  p.h = p.f;
  p.x_lo = -x_max;
  p.x_hi = x_max;
  p.k_avail = 64;
  return p;
}

/// Envelopes under which arctan_exp_pair verifies for k <= k_max:
/// D = 1, r = eps = 1/sqrt(2), C(x) = |x|, R = 1, delta = e^{-1} / k_max!.
inline AnalyticEnvelope arctan_exp_envelope(int k_max = 6) {
  AnalyticEnvelope e;
  e.D = 1.0;
  e.r = e.epsilon = 1.0 / std::sqrt(2.0);
  e.R = 1.0;
  e.delta = std::exp(-1.0) / detail::factorial(k_max);
  e.C = [](double x) { return std::abs(x); };
  return e;
}

namespace detail {

inline double stirling2(int n, int k) {
  std::vector<std::vector<double>> S(n + 1, std::vector<double>(n + 1, 0.0));
  S[0][0] = 1.0;
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= i; ++j) S[i][j] = j * S[i - 1][j] + S[i - 1][j - 1];
  return k <= n ? S[n][k] : 0.0;
}

}  // namespace detail

/// g o f with f(t, x) = m + e^{-alpha t} x, the way a coefficient of y enters
/// the transformed stochastic volatility market. Every t-derivative of f is
/// (-alpha)^j w with w = e^{-alpha t} x, so
///   d^k h/dt^k = (-alpha)^k sum_j S(k, j) g^(j)(m + w) w^j
/// with S the Stirling numbers of the second kind.
template <class G>
CompositePair shifted_exp_pair(std::string name, G g, double alpha, double m, double x_lo, double x_hi) {
  CompositePair p;
  p.name = std::move(name);
  p.g = [g](int k, double y) { return g.derivative(k, y); };
  p.f = [alpha, m](int k, double t, double x) {
    const double w = std::exp(-alpha * t) * x;
    return k == 0 ? m + w : std::pow(-alpha, k) * w;
  };
  p.h = [g, alpha, m](int k, double t, double x) {
    const double w = std::exp(-alpha * t) * x;
    if (k == 0) return g.derivative(0, m + w);
    double s = 0.0;
    for (int j = 1; j <= k; ++j) s += detail::stirling2(k, j) * g.derivative(j, m + w) * std::pow(w, j);
    return std::pow(-alpha, k) * s;
  };
  p.x_lo = x_lo;
  p.x_hi = x_hi;
  p.k_avail = 6;
  return p;
}

/// f-envelope of shifted_exp_pair for k <= k_max (alpha != 0):
/// C(x) = e^{max(0, -alpha)} |x|, R = 1/|alpha|, delta = e^{-|alpha|} / k_max!.
inline AnalyticEnvelope shifted_exp_envelope(double alpha, double D, double r, double eps, int k_max = 6) {
  if (alpha == 0.0) throw ModelError("shifted_exp_envelope: alpha must be nonzero");
  AnalyticEnvelope e;
  e.D = D;
  e.r = r;
  e.epsilon = eps;
  e.R = 1.0 / std::abs(alpha);
  e.delta = std::exp(-std::abs(alpha)) / detail::factorial(k_max);
  const double c = std::exp(std::max(0.0, -alpha));
  e.C = [c](double x) { return c * std::abs(x); };
  return e;
}

struct CompositionOptions {
  int k_max = 6;
  int n_t = 32;
  int n_x = 201;
  int n_y = 401;
};

struct EnvelopeReport {
  std::string pair;
  FdbBound bound;
  int k_max = 0;
  ValidationReport rows;
  /// True when every input-envelope row (g, f upper, f lower) passed.
  bool inputs_verified = true;
  /// Smallest k whose composite bound failed.
  std::optional<int> first_violation;
  /// sup |d^k h/dt^k| per k (index 0 unused).
  std::vector<double> h_sup;
};

/// Checks both input envelopes and the composite bound
/// sup_x |d^k h/dt^k (t, x)| <= M k!/L^k for 1 <= k <= k_max at probed t.
/// The f lower envelope is also checked at k = 0 (|f| >= delta |C|), the
/// form in which it enters the estimate of g^(j)(f).
inline EnvelopeReport envelope_check_composition(const CompositePair& pair, const AnalyticEnvelope& env,
                                                 const CompositionOptions& opt = {}) {
  env.check();
  if (opt.k_max < 1 || opt.k_max > 6) throw ModelError("envelope_check_composition: k_max must be in [1, 6]");
  if (opt.k_max > pair.k_avail) throw CapabilityError("envelope_check_composition: pair has derivatives only up to " +
                                                      std::to_string(pair.k_avail));
  if (opt.n_t < 1 || opt.n_x < 2 || opt.n_y < 2) throw ModelError("envelope_check_composition: probe counts too small");

  EnvelopeReport rep;
  rep.pair = pair.name;
  rep.bound = faa_di_bruno_bound(env);
  rep.k_max = opt.k_max;
  rep.h_sup.assign(opt.k_max + 1, 0.0);

  std::vector<double> ts(opt.n_t), xs(opt.n_x);
  for (int i = 0; i < opt.n_t; ++i) ts[i] = pair.t_lo + (i + 0.5) * (pair.t_hi - pair.t_lo) / opt.n_t;
  for (int i = 0; i < opt.n_x; ++i) xs[i] = pair.x_lo + i * (pair.x_hi - pair.x_lo) / (opt.n_x - 1);
  rep.rows.n_probes = opt.n_t * opt.n_x;

  double y_max = 0.0;
  for (double t : ts)
    for (double x : xs) y_max = std::max(y_max, std::abs(pair.f(0, t, x)));

  auto finish_row = [&](CheckRow row, bool input) {
    if (input && !row.passed) rep.inputs_verified = false;
    rep.rows.rows.push_back(std::move(row));
  };

  for (int k = 1; k <= opt.k_max; ++k) {
    const double kf = detail::factorial(k);
    double worst = 0.0, wy = 0.0;
    for (int i = 0; i < opt.n_y; ++i) {
      const double y = -y_max + 2.0 * y_max * i / (opt.n_y - 1);
      const double v = std::abs(pair.g(k, y)) * std::pow(env.r + env.epsilon * std::abs(y), k) / kf;
      if (v > worst) worst = v, wy = y;
    }
    auto row = make_row("analytic.g_envelope.k" + std::to_string(k),
                        "max |g^(k)(y)| (r + eps|y|)^k / k! over |y| <= sup|f| <= D", worst, env.D);
    row.passed = worst <= env.D;
    if (!row.passed) row.witness = Witness{0.0, {wy, 0.0}};
    finish_row(std::move(row), true);
  }

  for (int k = 0; k <= opt.k_max; ++k) {
    const double kf = detail::factorial(k);
    const double scale = kf / std::pow(env.R, k);
    double up = 0.0, lo = 0.0;
    Witness wu{}, wl{};
    for (double t : ts)
      for (double x : xs) {
        const double c = std::abs(env.C(x));
        const double d = std::abs(pair.f(k, t, x));
        const double u = c > 0.0 ? d / (c * scale) : (d > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        if (u > up) up = u, wu = {t, {x, 0.0}};
        if (c > 0.0) {
          const double l = env.delta * c * scale / std::max(d, std::numeric_limits<double>::min());
          if (l > lo) lo = l, wl = {t, {x, 0.0}};
        }
      }
    if (k >= 1) {
      auto row = make_row("analytic.f_upper.k" + std::to_string(k), "max |d^k f/dt^k| R^k / (k! |C(x)|) <= 1", up, 1.0);
      row.passed = up <= 1.0;
      if (!row.passed) row.witness = wu;
      finish_row(std::move(row), true);
    }
    auto row = make_row("analytic.f_lower.k" + std::to_string(k),
                        "max delta k! |C(x)| / (R^k |d^k f/dt^k|) <= 1", lo, 1.0);
    row.passed = lo <= 1.0;
    if (!row.passed) row.witness = wl;
    finish_row(std::move(row), true);
  }

  for (int k = 1; k <= opt.k_max; ++k) {
    double sup = 0.0;
    Witness w{};
    for (double t : ts)
      for (double x : xs) {
        const double d = std::abs(pair.h(k, t, x));
        if (d > sup) sup = d, w = {t, {x, 0.0}};
      }
    rep.h_sup[k] = sup;
    const double b = rep.bound.at(k);
    auto row = make_row("analytic.composite.k" + std::to_string(k), "sup_x |d^k h/dt^k| <= M k! / L^k", sup, b);
    row.passed = sup <= b;
    if (!row.passed) {
      row.witness = w;
      if (!rep.first_violation) rep.first_violation = k;
    }
    rep.rows.rows.push_back(std::move(row));
  }
  return rep;
}

inline nlohmann::json to_json(const EnvelopeReport& r) {
  nlohmann::json j{{"pair", r.pair},
                   {"M", r.bound.M},
                   {"L", r.bound.L},
                   {"k_max", r.k_max},
                   {"inputs_verified", r.inputs_verified},
                   {"passed", r.rows.passed()},
                   {"first_violation", r.first_violation ? nlohmann::json(*r.first_violation) : nlohmann::json(nullptr)},
                   {"rows", mcomp::to_json(r.rows)["rows"]}};
  return j;
}

}  // namespace mcomp::validation

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mcomp/core/box.hpp"
#include "mcomp/core/errors.hpp"
#include "mcomp/core/jet.hpp"
#include "mcomp/core/random.hpp"
#include "mcomp/core/smooth1d.hpp"
#include "mcomp/model/diffusion_model.hpp"
#include "mcomp/model/report.hpp"

namespace mcomp::stochvol {

/// Volatility premium mu(p, y) = scale * P(p) * Y(y).
struct MuSpec {
  double scale = 0.0;
  Smooth1D p_factor = Smooth1D::constant(1.0);
  Smooth1D y_factor = Smooth1D::constant(1.0);

  static MuSpec zero() { return {}; }
  static MuSpec product(double scale, Smooth1D p, Smooth1D y) { return {scale, p, y}; }

  /// 0.05 tanh(p - 1) (2/pi) atan(y): bounded, depends on both arguments.
  static MuSpec bounded_variant() {
    return product(0.05, Smooth1D::tanh(0.0, 1.0, 1.0), Smooth1D::arctan(0.0, 1.0));
  }

  bool is_zero() const { return scale == 0.0; }

  /// d^kp/dp^kp d^ky/dy^ky mu at (p, y).
  double derivative(int kp, int ky, double p, double y) const {
    if (is_zero()) return 0.0;
    return scale * p_factor.derivative(kp, p) * y_factor.derivative(ky, y);
  }

  double operator()(double p, double y) const { return derivative(0, 0, p, y); }
};

/// Constants of the derivative bound D k! / (rho + eps |y|)^k.
struct C1Constants {
  double D = 1.0;
  double rho = 1.0;
  double epsilon = 1.0;
};

struct StochVolParams {
  double alpha = 1.0;
  double m = 0.0;
  double r = 0.0;
  double Gamma = 1.0;
  Smooth1D nu = Smooth1D::arctan(0.5, 0.3);
  Smooth1D sigma1 = Smooth1D::arctan(0.1, 0.05);
  Smooth1D sigma2 = Smooth1D::arctan(0.1, 0.05);
  MuSpec mu;
  double P0 = 1.0;
  double Y0 = 0.0;
  /// Lower bound N required of nu and sigma^j.
  double floor = 0.04;
  C1Constants c1;

  static StochVolParams reference() { return {}; }

  /// (log P0, Y0 - m): the transformed initial state at t = 0.
  Vec2 x0() const { return {std::log(P0), Y0 - m}; }

  /// `require_floors = false` admits volatility functions without a positive
  /// infimum so that the assumption probes can report the failure.
  void check(bool require_floors = true) const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(alpha) || !finite(m)) throw ConstructionError("stochvol: alpha and m must be finite");
    if (!(r >= 0.0) || !finite(r)) throw ConstructionError("stochvol: r must be finite and >= 0");
    if (!(Gamma > 0.0) || !finite(Gamma)) throw ConstructionError("stochvol: Gamma must be positive");
    if (!(P0 > 0.0) || !finite(P0) || !finite(Y0)) throw ConstructionError("stochvol: P0 must be positive");
    if (!(floor > 0.0)) throw ConstructionError("stochvol: floor must be positive");
    if (!require_floors) {
      if (!(c1.D > 0.0) || !(c1.rho > 0.0) || !(c1.epsilon > 0.0))
        throw ConstructionError("stochvol: C1 constants must be positive");
      return;
    }
    if (!(nu.infimum() > 0.0)) throw ConstructionError("stochvol: nu has nonpositive floor");
    if (!(sigma1.infimum() > 0.0)) throw ConstructionError("stochvol: sigma1 has nonpositive floor");
    if (!(sigma2.infimum() > 0.0)) throw ConstructionError("stochvol: sigma2 has nonpositive floor");
    if (!(c1.D > 0.0) || !(c1.rho > 0.0) || !(c1.epsilon > 0.0))
      throw ConstructionError("stochvol: C1 constants must be positive");
  }
};

namespace detail {

/// exp(rate * t) as a jet in t.
inline Jet exp_time(double rate, double t) {
  Jet j = Jet::constant(std::exp(rate * t));
  j.t = rate * j.v;
  return j;
}

inline Jet apply(const Smooth1D& fn, const Jet& u) { return compose(u, fn.taylor3(u.v)); }

/// m + exp(-alpha t) x2
inline Jet original_y(const StochVolParams& p, double t, const Vec2& x) {
  return p.m + exp_time(-p.alpha, t) * Jet::coordinate(1, x[1]);
}

}  // namespace detail

/// Transformed market in x1 = log P, x2 = exp(alpha t) (Y - m):
///   b1 = r - nu~^2 / 2,  b2 = -exp(alpha t) mu~,
///   sigma = [[nu~, 0], [exp(alpha t) sigma~1, exp(alpha t) sigma~2]],
///   f = exp(-r + x1),  g = exp(-r) (exp(x1) - Gamma)^+.
inline model::DiffusionModel build_stochvol_model(const StochVolParams& p, bool require_floors = true) {
  p.check(require_floors);
  using model::CoefficientField;
  model::DiffusionModel m;
  m.kind = "stochvol";
  auto nu_t = [p](double t, const Vec2& x) { return detail::apply(p.nu, detail::original_y(p, t, x)); };
  m.drift[0] = CoefficientField("b1", [p, nu_t](double t, const Vec2& x) {
    const Jet n = nu_t(t, x);
    return p.r - 0.5 * (n * n);
  });
  if (p.mu.is_zero()) {
    m.drift[1] = CoefficientField::constant(0.0, "b2");
  } else {
    m.drift[1] = CoefficientField("b2", [p](double t, const Vec2& x) {
      const Jet price = exp(Jet::coordinate(0, x[0]));
      const Jet mu = p.mu.scale * (detail::apply(p.mu.p_factor, price) *
                                   detail::apply(p.mu.y_factor, detail::original_y(p, t, x)));
      return -1.0 * (detail::exp_time(p.alpha, t) * mu);
    });
  }
  m.vol[0][0] = CoefficientField("sigma11", nu_t);
  m.vol[0][1] = CoefficientField::constant(0.0, "sigma12");
  m.vol[1][0] = CoefficientField("sigma21", [p](double t, const Vec2& x) {
    return detail::exp_time(p.alpha, t) * detail::apply(p.sigma1, detail::original_y(p, t, x));
  });
  m.vol[1][1] = CoefficientField("sigma22", [p](double t, const Vec2& x) {
    return detail::exp_time(p.alpha, t) * detail::apply(p.sigma2, detail::original_y(p, t, x));
  });
  m.rate = CoefficientField::constant(p.r, "r");
  m.forward = CoefficientField("f", [r = p.r](double, const Vec2& x) { return exp(Jet::coordinate(0, x[0]) - r); });
  m.payoff = model::call_payoff(p.Gamma, std::exp(-p.r));
  m.x0 = p.x0();

  const double nu_inf = p.nu.infimum(), s2_inf = p.sigma2.infimum();
  const double s1_sup = std::max(std::abs(p.sigma1.infimum()), std::abs(p.sigma1.supremum()));
  const double decay = std::max(1.0, std::exp(-p.alpha));
  m.envelope.n_inv = nu_inf > 0.0 && s2_inf > 0.0
                         ? 1.01 * std::sqrt(1.0 / (nu_inf * nu_inf) + std::pow(s1_sup / (nu_inf * s2_inf), 2) +
                                            std::pow(decay / s2_inf, 2))
                         : std::numeric_limits<double>::infinity();
  m.envelope.n_growth = 1.0;
  m.envelope.D = p.c1.D;
  m.envelope.rho = p.c1.rho;
  m.envelope.epsilon = p.c1.epsilon;
  m.call_reduction = model::CallReduction{p.Gamma, p.r};
  return m;
}

/// The market in its original coordinates (P, Y):
///   dP = r P dt + nu(Y) P dW1,
///   dY = (alpha (m - Y) - mu(P, Y)) dt + sigma1(Y) dW1 + sigma2(Y) dW2.
/// Used to cross-check the change of variables; f = exp(-r) P, g = exp(-r) (P - Gamma)^+.
inline model::DiffusionModel build_original_model(const StochVolParams& p) {
  p.check();
  using model::CoefficientField;
  model::DiffusionModel m;
  m.kind = "stochvol_original";
  auto y = [](const Vec2& x) { return Jet::coordinate(1, x[1]); };
  m.drift[0] = CoefficientField("b1", [r = p.r](double, const Vec2& x) { return r * Jet::coordinate(0, x[0]); });
  m.drift[1] = CoefficientField("b2", [p, y](double, const Vec2& x) {
    Jet out = p.alpha * (p.m - y(x));
    if (!p.mu.is_zero())
      out = out - p.mu.scale * (detail::apply(p.mu.p_factor, Jet::coordinate(0, x[0])) * detail::apply(p.mu.y_factor, y(x)));
    return out;
  });
  m.vol[0][0] = CoefficientField("sigma11", [p, y](double, const Vec2& x) {
    return detail::apply(p.nu, y(x)) * Jet::coordinate(0, x[0]);
  });
  m.vol[0][1] = CoefficientField::constant(0.0, "sigma12");
  m.vol[1][0] = CoefficientField("sigma21", [p, y](double, const Vec2& x) { return detail::apply(p.sigma1, y(x)); });
  m.vol[1][1] = CoefficientField("sigma22", [p, y](double, const Vec2& x) { return detail::apply(p.sigma2, y(x)); });
  m.rate = CoefficientField::constant(p.r, "r");
  const double disc = std::exp(-p.r);
  m.forward = CoefficientField("f", [disc](double, const Vec2& x) { return disc * Jet::coordinate(0, x[0]); });
  const double G = p.Gamma;
  m.payoff = model::Payoff{"call",
                           [=](const Vec2& x) { return disc * std::max(x[0] - G, 0.0); },
                           [=](const Vec2& x) { return x[0] > G ? Vec2{disc, 0.0} : Vec2{0.0, 0.0}; },
                           model::KinkLocus{0, G}, disc * G};
  m.x0 = {p.P0, p.Y0};
  return m;
}

/// (P, Y) at time t from the transformed state.
inline Vec2 to_original(const StochVolParams& p, double t, const Vec2& x) {
  return {std::exp(x[0]), p.m + std::exp(-p.alpha * t) * x[1]};
}

/// exp(-r t) P_t, the discounted stock at time t.
inline double discounted_stock(const StochVolParams& p, double t, const Vec2& x) {
  return std::exp(-p.r * t + x[0]);
}

struct C1Options {
  int k_max = 6;
  int n_probes = 4096;
  /// Probe ranges: y for nu, sigma^j, and (p, y) for mu.
  double y_lo = -20.0, y_hi = 20.0;
  double p_lo = -20.0, p_hi = 20.0;
  /// Bound used for the L-infinity probes of y (e^p)^l d_y^k d_p^l mu.
  double mu_bound = 1e3;
  double nu_prime_max_zero_fraction = 1e-3;
};

/// Probe of the regularity condition on nu, sigma^j and mu. Each derivative
/// row records max |d^k h / dy^k| (rho + eps |y|)^k / k! over the probes
/// (bound D); the sum rows combine mu, nu and sigma^j as the condition does.
inline ValidationReport verify_C1(const StochVolParams& p, const C1Options& opt = {}) {
  if (opt.k_max < 1 || opt.k_max > 6) throw std::invalid_argument("verify_C1: k_max must be in [1, 6]");
  if (opt.n_probes < 1) throw std::invalid_argument("verify_C1: n_probes must be >= 1");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto& c = p.c1;
  const Box box{{opt.p_lo, opt.y_lo}, {opt.p_hi, opt.y_hi}};
  box.check();

  auto floor_row = [&](const std::string& name, const Smooth1D& fn) {
    CheckRow row = make_row("C1.floor." + name, name + "(y) > N: infimum over the line and over probes", inf, p.floor);
    row.value = fn.infimum();
    return row;
  };
  CheckRow f_nu = floor_row("nu", p.nu), f_s1 = floor_row("sigma1", p.sigma1), f_s2 = floor_row("sigma2", p.sigma2);
  CheckRow nu_prime = make_row("C1.nu_prime_nonzero", "fraction of probes with dnu/dy == 0", 0.0,
                               opt.nu_prime_max_zero_fraction);

  std::vector<CheckRow> deriv_rows, sum_rows;
  const char* names[4] = {"mu", "nu", "sigma1", "sigma2"};
  const Smooth1D* fns[4] = {nullptr, &p.nu, &p.sigma1, &p.sigma2};
  for (int k = 1; k <= opt.k_max; ++k) {
    for (const char* n : names)
      deriv_rows.push_back(make_row("C1.k=" + std::to_string(k) + "." + n,
                                    std::string("max |d^k ") + n + "/dy^k| (rho + eps|y|)^k / k!", 0.0, c.D));
    for (int j = 1; j <= 2; ++j)
      sum_rows.push_back(make_row("C1.k=" + std::to_string(k) + ".sum_j=" + std::to_string(j),
                                  "max (|d^k mu| + |d^k nu| + |d^k sigma" + std::to_string(j) +
                                      "|) (rho + eps|y|)^k / k!",
                                  0.0, c.D));
  }
  const int lk[3][2] = {{0, 1}, {0, 2}, {1, 1}};
  std::vector<CheckRow> mu_rows;
  for (const auto& q : lk)
    mu_rows.push_back(make_row("C1.mu_weighted.l=" + std::to_string(q[0]) + ".k=" + std::to_string(q[1]),
                               "max |y e^(l p) d_y^k d_p^l mu| over probes", 0.0, opt.mu_bound));

  auto raise = [](CheckRow& row, double v, const Vec2& at) {
    if (!row.witness || v > row.value) {
      row.value = v;
      row.witness = Witness{0.0, at};
    }
  };
  auto lower = [](CheckRow& row, double v, const Vec2& at) {
    if (v < row.value) {
      row.value = v;
      row.witness = Witness{0.0, at};
    }
  };
  long zero_slope = 0;
  for (int s = 1; s <= opt.n_probes; ++s) {
    const auto u = Halton::point(static_cast<std::uint64_t>(s));
    const Vec2 at = box.at(u[0], u[1]);
    const double pp = at[0], y = at[1];
    lower(f_nu, p.nu(y), at);
    lower(f_s1, p.sigma1(y), at);
    lower(f_s2, p.sigma2(y), at);
    if (p.nu.derivative(1, y) == 0.0) ++zero_slope;
    double fact = 1.0;
    for (int k = 1; k <= opt.k_max; ++k) {
      fact *= k;
      const double w = std::pow(c.rho + c.epsilon * std::abs(y), k) / fact;
      double d[4];
      d[0] = std::abs(p.mu.derivative(0, k, pp, y));
      for (int i = 1; i < 4; ++i) d[i] = std::abs(fns[i]->derivative(k, y));
      for (int i = 0; i < 4; ++i) raise(deriv_rows[(k - 1) * 4 + i], d[i] * w, at);
      for (int j = 0; j < 2; ++j) raise(sum_rows[(k - 1) * 2 + j], (d[0] + d[1] + d[2 + j]) * w, at);
    }
    for (int q = 0; q < 3; ++q) {
      const int l = lk[q][0], k = lk[q][1];
      raise(mu_rows[q], std::abs(y * std::exp(l * pp) * p.mu.derivative(l, k, pp, y)), at);
    }
  }
  nu_prime.value = static_cast<double>(zero_slope) / opt.n_probes;
  for (CheckRow* row : {&f_nu, &f_s1, &f_s2}) row->passed = row->value > row->bound;
  nu_prime.passed = nu_prime.value <= nu_prime.bound;

  ValidationReport rep;
  rep.n_probes = opt.n_probes;
  rep.rows = {f_nu, f_s1, f_s2, nu_prime};
  for (auto* group : {&deriv_rows, &sum_rows, &mu_rows})
    for (auto& row : *group) {
      row.passed = std::isfinite(row.value) && row.value <= row.bound;
      rep.rows.push_back(row);
    }
  return rep;
}

inline nlohmann::json to_json(const StochVolParams& p) {
  auto fn = [](const Smooth1D& s) {
    return nlohmann::json{{"kind", Smooth1D::kind_name(s.kind())},
                          {"base", s.base()},
                          {"amplitude", s.amplitude()},
                          {"center", s.center()},
                          {"width", s.width()}};
  };
  return {{"alpha", p.alpha},
          {"m", p.m},
          {"r", p.r},
          {"Gamma", p.Gamma},
          {"nu", fn(p.nu)},
          {"sigma1", fn(p.sigma1)},
          {"sigma2", fn(p.sigma2)},
          {"mu", {{"scale", p.mu.scale}, {"p_factor", fn(p.mu.p_factor)}, {"y_factor", fn(p.mu.y_factor)}}},
          {"P0", p.P0},
          {"Y0", p.Y0},
          {"floor", p.floor},
          {"c1", {{"D", p.c1.D}, {"rho", p.c1.rho}, {"epsilon", p.c1.epsilon}}}};
}

}  // namespace mcomp::stochvol

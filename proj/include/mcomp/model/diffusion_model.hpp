#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include "mcomp/core/box.hpp"
#include "mcomp/core/errors.hpp"
#include "mcomp/core/jet.hpp"
#include "mcomp/model/coefficient_field.hpp"
#include "mcomp/model/payoff.hpp"

namespace mcomp::model {

/// Constants used only for validation and reporting.
struct Envelope {
  double n_inv = 10.0;     // bound on the Frobenius norm of sigma^{-1}
  double n_growth = 1.0;   // |dg/dx_j| <= exp(N (1 + |x|))
  // analytic-envelope constants of the coefficient family
  double D = 1.0;
  double rho = 1.0;
  double epsilon = 1.0;
  double delta = 0.5;
  double R = 1.0;
};

/// Present when the model is the log-price / transformed-volatility market
/// with forward function f = exp(-r + x1) and coefficients that depend on
/// x2 only at t = 1; enables the closed-form pairing for a call.
struct CallReduction {
  double strike = 1.0;
  double rate = 0.0;
};

using Jet2 = std::array<Jet, 2>;
using JetMat2 = std::array<std::array<Jet, 2>, 2>;

struct DiffusionModel {
  std::string kind = "custom";
  std::array<CoefficientField, 2> drift;
  std::array<std::array<CoefficientField, 2>, 2> vol;
  CoefficientField rate;
  CoefficientField forward;
  Payoff payoff = constant_payoff(1.0);
  Vec2 x0{0.0, 0.0};
  Envelope envelope;
  std::optional<CallReduction> call_reduction;

  Jet2 drift_jets(double t, const Vec2& x) const { return {drift[0].jet(t, x), drift[1].jet(t, x)}; }

  JetMat2 vol_jets(double t, const Vec2& x) const {
    return {{{vol[0][0].jet(t, x), vol[0][1].jet(t, x)}, {vol[1][0].jet(t, x), vol[1][1].jet(t, x)}}};
  }

  /// a = sigma sigma^T with exact derivatives through the product rule.
  JetMat2 covariance_jets(double t, const Vec2& x) const {
    const JetMat2 s = vol_jets(t, x);
    JetMat2 a;
    a[0][0] = s[0][0] * s[0][0] + s[0][1] * s[0][1];
    a[0][1] = s[0][0] * s[1][0] + s[0][1] * s[1][1];
    a[1][1] = s[1][0] * s[1][0] + s[1][1] * s[1][1];
    a[1][0] = a[0][1];
    return a;
  }
};

struct Coefficients {
  Vec2 b{};
  Mat2 sigma{};
  Mat2 a{};
  double r = 0.0;
};

namespace detail {
inline void require_finite(double v, const char* field, double t, const Vec2& x) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "model coefficient '" << field << "' is not finite at t=" << t << ", x=(" << x[0] << ", " << x[1] << ")";
    throw ModelError(os.str());
  }
}
}  // namespace detail

/// b, sigma, a = sigma sigma^T and r at (t, x).
inline Coefficients eval_coeffs(const DiffusionModel& m, double t, const Vec2& x) {
  Coefficients c;
  static constexpr const char* kB[2] = {"b1", "b2"};
  static constexpr const char* kS[2][2] = {{"sigma11", "sigma12"}, {"sigma21", "sigma22"}};
  for (int j = 0; j < 2; ++j) {
    c.b[j] = m.drift[j].eval(t, x);
    detail::require_finite(c.b[j], kB[j], t, x);
    for (int k = 0; k < 2; ++k) {
      c.sigma[j][k] = m.vol[j][k].eval(t, x);
      detail::require_finite(c.sigma[j][k], kS[j][k], t, x);
    }
  }
  c.r = m.rate.eval(t, x);
  detail::require_finite(c.r, "r", t, x);
  const Mat2& s = c.sigma;
  c.a[0][0] = s[0][0] * s[0][0] + s[0][1] * s[0][1];
  c.a[0][1] = s[0][0] * s[1][0] + s[0][1] * s[1][1];
  c.a[1][1] = s[1][0] * s[1][0] + s[1][1] * s[1][1];
  c.a[1][0] = c.a[0][1];
  return c;
}

/// Model with constant drift, volatility and rate; f and g supplied.
inline DiffusionModel constant_model(const Vec2& b, const Mat2& sigma, double r, CoefficientField f, Payoff g,
                                     const Vec2& x0 = {0.0, 0.0}) {
  DiffusionModel m;
  m.kind = "constant";
  for (int j = 0; j < 2; ++j) {
    m.drift[j] = CoefficientField::constant(b[j], "b" + std::to_string(j + 1));
    for (int k = 0; k < 2; ++k)
      m.vol[j][k] = CoefficientField::constant(sigma[j][k], "sigma" + std::to_string(j + 1) + std::to_string(k + 1));
  }
  m.rate = CoefficientField::constant(r, "r");
  m.forward = std::move(f);
  m.payoff = std::move(g);
  m.x0 = x0;
  return m;
}

/// f = x1, g = x2, sigma = I, b = 0, r = 0: the two assets are independent coordinates.
inline DiffusionModel independent_coordinates_model() {
  DiffusionModel m = constant_model({0.0, 0.0}, identity2(), 0.0, CoefficientField::coordinate(0, "f"),
                                    coordinate_payoff(1));
  m.kind = "independent_coordinates";
  m.envelope.n_inv = 2.0;
  m.envelope.n_growth = 1.0;
  return m;
}

/// Log-price model with constant volatility nu on x1 and an independent
/// second factor of volatility vol2: b = (r - nu^2/2, 0), sigma = diag(nu, vol2),
/// f = exp(-r + x1), g = exp(-r) (exp(x1) - strike)^+.
inline DiffusionModel lognormal_model(double nu, double r, double strike, double vol2 = 0.2,
                                      const Vec2& x0 = {0.0, 0.0}) {
  if (!(nu > 0.0) || !(vol2 > 0.0)) throw ConstructionError("lognormal_model: volatilities must be positive");
  if (!(strike > 0.0)) throw ConstructionError("lognormal_model: strike must be positive");
  if (r < 0.0) throw ConstructionError("lognormal_model: rate must be nonnegative");
  CoefficientField f("f", [r](double, const Vec2& x) { return exp(Jet::coordinate(0, x[0]) - r); });
  DiffusionModel m = constant_model({r - 0.5 * nu * nu, 0.0}, Mat2{{{nu, 0.0}, {0.0, vol2}}}, r, std::move(f),
                                    call_payoff(strike, std::exp(-r)), x0);
  m.kind = "lognormal";
  m.envelope.n_inv = 1.01 * std::sqrt(1.0 / (nu * nu) + 1.0 / (vol2 * vol2));
  m.envelope.n_growth = 1.0;
  m.call_reduction = CallReduction{strike, r};
  return m;
}

}  // namespace mcomp::model

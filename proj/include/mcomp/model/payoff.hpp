#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "mcomp/core/linalg.hpp"

namespace mcomp::model {

/// Line {x : x[axis] == position} along which a payoff is not classically
/// differentiable.
struct KinkLocus {
  int axis = 0;
  double position = 0.0;

  bool contains(const Vec2& x, double tol = 0.0) const { return std::abs(x[axis] - position) <= tol; }
};

/// Terminal payoff with a weak-gradient accessor. The gradient is the
/// one-sided classical derivative away from the kink locus and must not be
/// evaluated on it.
struct Payoff {
  std::string name;
  std::function<double(const Vec2&)> value;
  std::function<Vec2(const Vec2&)> gradient;
  std::optional<KinkLocus> kink;
  /// Typical magnitude, used to express absolute tolerances relative to the claim.
  double scale = 1.0;

  double operator()(const Vec2& x) const { return value(x); }
};

/// c * (exp(x1) - strike)^+
inline Payoff call_payoff(double strike, double c = 1.0) {
  const double k = std::log(strike);
  return Payoff{"call",
                [=](const Vec2& x) { return c * std::max(std::exp(x[0]) - strike, 0.0); },
                [=](const Vec2& x) { return x[0] > k ? Vec2{c * std::exp(x[0]), 0.0} : Vec2{0.0, 0.0}; },
                KinkLocus{0, k}, c * strike};
}

/// c * (strike - exp(x1))^+
inline Payoff put_payoff(double strike, double c = 1.0) {
  const double k = std::log(strike);
  return Payoff{"put",
                [=](const Vec2& x) { return c * std::max(strike - std::exp(x[0]), 0.0); },
                [=](const Vec2& x) { return x[0] < k ? Vec2{-c * std::exp(x[0]), 0.0} : Vec2{0.0, 0.0}; },
                KinkLocus{0, k}, c * strike};
}

/// c * 1{exp(x1) > strike}; the gradient is the classical one off the jump.
inline Payoff digital_payoff(double strike, double c = 1.0) {
  const double k = std::log(strike);
  return Payoff{"digital", [=](const Vec2& x) { return x[0] > k ? c : 0.0; },
                [](const Vec2&) { return Vec2{0.0, 0.0}; }, KinkLocus{0, k}, c};
}

inline Payoff constant_payoff(double c) {
  return Payoff{"constant", [=](const Vec2&) { return c; }, [](const Vec2&) { return Vec2{0.0, 0.0}; },
                std::nullopt, std::abs(c) > 0.0 ? std::abs(c) : 1.0};
}

/// x_j (coordinate payoff).
inline Payoff coordinate_payoff(int j) {
  return Payoff{"x" + std::to_string(j + 1), [=](const Vec2& x) { return x[j]; },
                [=](const Vec2&) {
                  Vec2 g{0.0, 0.0};
                  g[j] = 1.0;
                  return g;
                },
                std::nullopt, 1.0};
}

/// alpha * g1 + beta * g2 (kink taken from g1, else g2).
inline Payoff combine(double alpha, const Payoff& g1, double beta, const Payoff& g2) {
  return Payoff{"combination",
                [=](const Vec2& x) { return alpha * g1.value(x) + beta * g2.value(x); },
                [=](const Vec2& x) {
                  const Vec2 a = g1.gradient(x), b = g2.gradient(x);
                  return Vec2{alpha * a[0] + beta * b[0], alpha * a[1] + beta * b[1]};
                },
                g1.kink ? g1.kink : g2.kink, std::abs(alpha) * g1.scale + std::abs(beta) * g2.scale};
}

}  // namespace mcomp::model

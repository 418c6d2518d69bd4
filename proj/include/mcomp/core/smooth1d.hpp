#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "mcomp/core/errors.hpp"

namespace mcomp {

/// Closed-form scalar functions of one variable with derivatives up to
/// `kMaxOrder`. These are the building blocks for the bounded-smooth
/// coefficient functions of the stochastic volatility family.
///
///   constant: c
///   linear:   base + amplitude * y
///   arctan:   base + amplitude * (2/pi) * atan((y - center) / width)
///   tanh:     base + amplitude * tanh((y - center) / width)
///   exp:      amplitude * exp(y / width), width may be negative
class Smooth1D {
 public:
  enum class Kind { constant, linear, arctan, tanh, exp };
  static constexpr int kMaxOrder = 8;

  Smooth1D() = default;

  static Smooth1D constant(double c) { return Smooth1D(Kind::constant, c, 0.0, 0.0, 1.0); }
  static Smooth1D linear(double base, double slope) { return Smooth1D(Kind::linear, base, slope, 0.0, 1.0); }
  static Smooth1D arctan(double base, double amplitude, double center = 0.0, double width = 1.0) {
    return Smooth1D(Kind::arctan, base, amplitude, center, width);
  }
  static Smooth1D tanh(double base, double amplitude, double center = 0.0, double width = 1.0) {
    return Smooth1D(Kind::tanh, base, amplitude, center, width);
  }
  static Smooth1D exponential(double amplitude, double width) {
    return Smooth1D(Kind::exp, 0.0, amplitude, 0.0, width);
  }

  Kind kind() const { return kind_; }
  double base() const { return base_; }
  double amplitude() const { return amplitude_; }
  double center() const { return center_; }
  double width() const { return width_; }

  static std::string kind_name(Kind k) {
    switch (k) {
      case Kind::constant: return "constant";
      case Kind::linear: return "linear";
      case Kind::arctan: return "arctan";
      case Kind::tanh: return "tanh";
      case Kind::exp: return "exp";
    }
    return "?";
  }

  /// k-th derivative at y, 0 <= k <= kMaxOrder.
  double derivative(int k, double y) const {
    if (k < 0 || k > kMaxOrder) throw CapabilityError("Smooth1D: derivative order out of range");
    switch (kind_) {
      case Kind::constant: return k == 0 ? base_ : 0.0;
      case Kind::linear:
        if (k == 0) return base_ + amplitude_ * y;
        return k == 1 ? amplitude_ : 0.0;
      case Kind::arctan: {
        const double s = (y - center_) / width_;
        if (k == 0) return base_ + amplitude_ * (2.0 / std::numbers::pi) * std::atan(s);
        return amplitude_ * (2.0 / std::numbers::pi) * std::pow(width_, -k) * arctan_derivative(k, s);
      }
      case Kind::tanh: {
        const double s = (y - center_) / width_;
        if (k == 0) return base_ + amplitude_ * std::tanh(s);
        return amplitude_ * std::pow(width_, -k) * tanh_derivative(k, s);
      }
      case Kind::exp: return amplitude_ * std::pow(width_, -k) * std::exp(y / width_);
    }
    return 0.0;
  }

  double operator()(double y) const { return derivative(0, y); }

  /// Value and first three derivatives, the shape consumed by jet composition.
  std::array<double, 4> taylor3(double y) const {
    return {derivative(0, y), derivative(1, y), derivative(2, y), derivative(3, y)};
  }

  /// Infimum over the real line (may be -inf or not attained).
  double infimum() const {
    switch (kind_) {
      case Kind::constant: return base_;
      case Kind::linear: return amplitude_ == 0.0 ? base_ : -std::numeric_limits<double>::infinity();
      case Kind::arctan:
      case Kind::tanh: return base_ - std::abs(amplitude_);
      case Kind::exp:
        if (amplitude_ == 0.0) return 0.0;
        return amplitude_ > 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  double supremum() const {
    switch (kind_) {
      case Kind::constant: return base_;
      case Kind::linear: return amplitude_ == 0.0 ? base_ : std::numeric_limits<double>::infinity();
      case Kind::arctan:
      case Kind::tanh: return base_ + std::abs(amplitude_);
      case Kind::exp:
        if (amplitude_ == 0.0) return 0.0;
        return amplitude_ > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    return 0.0;
  }

  bool is_constant() const {
    return kind_ == Kind::constant || (kind_ != Kind::exp && amplitude_ == 0.0) ||
           (kind_ == Kind::exp && amplitude_ == 0.0);
  }

  /// d^k/ds^k atan(s) = (k-1)! cos^k(theta) sin(k (theta + pi/2)), theta = atan(s).
  static double arctan_derivative(int k, double s) {
    const double theta = std::atan(s);
    double fact = 1.0;
    for (int i = 2; i < k; ++i) fact *= i;
    return fact * std::pow(std::cos(theta), k) * std::sin(k * (theta + 0.5 * std::numbers::pi));
  }

  /// d^k/ds^k tanh(s) as a polynomial in T = tanh(s): p_{k+1}(T) = p_k'(T) (1 - T^2).
  static double tanh_derivative(int k, double s) {
    std::vector<double> p{0.0, 1.0};  // p_0(T) = T
    for (int n = 0; n < k; ++n) {
      std::vector<double> dp(p.size() > 1 ? p.size() - 1 : 1, 0.0);
      for (std::size_t i = 1; i < p.size(); ++i) dp[i - 1] = static_cast<double>(i) * p[i];
      std::vector<double> next(dp.size() + 2, 0.0);
      for (std::size_t i = 0; i < dp.size(); ++i) {
        next[i] += dp[i];
        next[i + 2] -= dp[i];
      }
      p = std::move(next);
    }
    const double T = std::tanh(s);
    double acc = 0.0;
    for (std::size_t i = p.size(); i-- > 0;) acc = acc * T + p[i];
    return acc;
  }

 private:
  Smooth1D(Kind kind, double base, double amplitude, double center, double width)
      : kind_(kind), base_(base), amplitude_(amplitude), center_(center), width_(width) {
    if (!std::isfinite(width_) || (kind_ == Kind::exp ? width_ == 0.0 : !(width_ > 0.0)))
      throw ConstructionError("Smooth1D: invalid width");
  }

  Kind kind_ = Kind::constant;
  double base_ = 0.0;
  double amplitude_ = 0.0;
  double center_ = 0.0;
  double width_ = 1.0;
};

}  // namespace mcomp

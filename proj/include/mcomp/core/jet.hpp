#pragma once

#include <array>
#include <cmath>

#include "mcomp/core/linalg.hpp"

namespace mcomp {

/// Truncated Taylor data of a scalar field of (t, x) at one point: the value,
/// the time derivative, x-derivatives up to third order and the mixed
/// derivatives d/dt d/dx_j. Arithmetic on jets applies the exact product and
/// chain rules, so a coefficient assembled from closed-form pieces carries
/// exact derivatives.
struct Jet {
  double v = 0.0;
  double t = 0.0;
  Vec2 x{};
  Mat2 xx{};
  std::array<double, 8> xxx{};  // [4j + 2k + l]
  Vec2 tx{};

  double third(int j, int k, int l) const { return xxx[4 * j + 2 * k + l]; }

  static Jet constant(double c) {
    Jet r;
    r.v = c;
    return r;
  }

  /// The coordinate x_j at point value `value`.
  static Jet coordinate(int j, double value) {
    Jet r;
    r.v = value;
    r.x[j] = 1.0;
    return r;
  }

  /// The time variable at `value`.
  static Jet time(double value) {
    Jet r;
    r.v = value;
    r.t = 1.0;
    return r;
  }
};

inline Jet operator+(const Jet& a, const Jet& b) {
  Jet r;
  r.v = a.v + b.v;
  r.t = a.t + b.t;
  for (int j = 0; j < 2; ++j) {
    r.x[j] = a.x[j] + b.x[j];
    r.tx[j] = a.tx[j] + b.tx[j];
    for (int k = 0; k < 2; ++k) r.xx[j][k] = a.xx[j][k] + b.xx[j][k];
  }
  for (int i = 0; i < 8; ++i) r.xxx[i] = a.xxx[i] + b.xxx[i];
  return r;
}

inline Jet operator*(double s, const Jet& a) {
  Jet r;
  r.v = s * a.v;
  r.t = s * a.t;
  for (int j = 0; j < 2; ++j) {
    r.x[j] = s * a.x[j];
    r.tx[j] = s * a.tx[j];
    for (int k = 0; k < 2; ++k) r.xx[j][k] = s * a.xx[j][k];
  }
  for (int i = 0; i < 8; ++i) r.xxx[i] = s * a.xxx[i];
  return r;
}

inline Jet operator-(const Jet& a) { return -1.0 * a; }
inline Jet operator-(const Jet& a, const Jet& b) { return a + (-1.0 * b); }
inline Jet operator+(const Jet& a, double c) {
  Jet r = a;
  r.v += c;
  return r;
}
inline Jet operator+(double c, const Jet& a) { return a + c; }
inline Jet operator-(const Jet& a, double c) { return a + (-c); }
inline Jet operator-(double c, const Jet& a) { return c + (-a); }

inline Jet operator*(const Jet& a, const Jet& b) {
  Jet r;
  r.v = a.v * b.v;
  r.t = a.t * b.v + a.v * b.t;
  for (int j = 0; j < 2; ++j) {
    r.x[j] = a.x[j] * b.v + a.v * b.x[j];
    r.tx[j] = a.tx[j] * b.v + a.t * b.x[j] + a.x[j] * b.t + a.v * b.tx[j];
    for (int k = 0; k < 2; ++k) {
      r.xx[j][k] = a.xx[j][k] * b.v + a.x[j] * b.x[k] + a.x[k] * b.x[j] + a.v * b.xx[j][k];
      for (int l = 0; l < 2; ++l) {
        r.xxx[4 * j + 2 * k + l] = a.third(j, k, l) * b.v + a.xx[j][k] * b.x[l] + a.xx[j][l] * b.x[k] +
                                   a.xx[k][l] * b.x[j] + a.x[j] * b.xx[k][l] + a.x[k] * b.xx[j][l] +
                                   a.x[l] * b.xx[j][k] + a.v * b.third(j, k, l);
      }
    }
  }
  return r;
}

inline Jet operator*(const Jet& a, double s) { return s * a; }

/// phi(u) given phi and its first three derivatives evaluated at u.v.
inline Jet compose(const Jet& u, const std::array<double, 4>& d) {
  Jet r;
  r.v = d[0];
  r.t = d[1] * u.t;
  for (int j = 0; j < 2; ++j) {
    r.x[j] = d[1] * u.x[j];
    r.tx[j] = d[2] * u.t * u.x[j] + d[1] * u.tx[j];
    for (int k = 0; k < 2; ++k) {
      r.xx[j][k] = d[2] * u.x[j] * u.x[k] + d[1] * u.xx[j][k];
      for (int l = 0; l < 2; ++l) {
        r.xxx[4 * j + 2 * k + l] = d[3] * u.x[j] * u.x[k] * u.x[l] +
                                   d[2] * (u.xx[j][k] * u.x[l] + u.xx[j][l] * u.x[k] + u.xx[k][l] * u.x[j]) +
                                   d[1] * u.third(j, k, l);
      }
    }
  }
  return r;
}

inline Jet exp(const Jet& u) {
  const double e = std::exp(u.v);
  return compose(u, {e, e, e, e});
}

inline Jet square(const Jet& u) { return u * u; }

}  // namespace mcomp

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>

namespace mcomp {

using Vec2 = std::array<double, 2>;

/// Row-major 2x2 matrix, m[row][col].
using Mat2 = std::array<std::array<double, 2>, 2>;

inline constexpr Mat2 identity2() { return Mat2{{{1.0, 0.0}, {0.0, 1.0}}}; }

inline constexpr double det(const Mat2& m) { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }

inline constexpr double trace(const Mat2& m) { return m[0][0] + m[1][1]; }

inline constexpr Mat2 transpose(const Mat2& m) { return Mat2{{{m[0][0], m[1][0]}, {m[0][1], m[1][1]}}}; }

inline constexpr Mat2 operator*(const Mat2& a, const Mat2& b) {
  Mat2 c{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return c;
}

inline constexpr Mat2 operator+(const Mat2& a, const Mat2& b) {
  return Mat2{{{a[0][0] + b[0][0], a[0][1] + b[0][1]}, {a[1][0] + b[1][0], a[1][1] + b[1][1]}}};
}

inline constexpr Mat2 operator*(double s, const Mat2& a) {
  return Mat2{{{s * a[0][0], s * a[0][1]}, {s * a[1][0], s * a[1][1]}}};
}

/// Row vector times matrix: (v^T M)_j = sum_i v_i M_ij.
inline constexpr Vec2 row_times(const Vec2& v, const Mat2& m) {
  return Vec2{v[0] * m[0][0] + v[1] * m[1][0], v[0] * m[0][1] + v[1] * m[1][1]};
}

inline constexpr Vec2 operator*(const Mat2& m, const Vec2& v) {
  return Vec2{m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]};
}

inline constexpr double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }

inline double norm(const Vec2& v) { return std::hypot(v[0], v[1]); }

inline double frobenius(const Mat2& m) {
  return std::sqrt(m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1]);
}

/// Inverse, or nullopt when the determinant is exactly zero or not finite.
inline std::optional<Mat2> inverse(const Mat2& m) {
  const double d = det(m);
  if (d == 0.0 || !std::isfinite(d)) return std::nullopt;
  return Mat2{{{m[1][1] / d, -m[0][1] / d}, {-m[1][0] / d, m[0][0] / d}}};
}

/// Matrix with rows r0, r1.
inline constexpr Mat2 from_rows(const Vec2& r0, const Vec2& r1) { return Mat2{{{r0[0], r0[1]}, {r1[0], r1[1]}}}; }

/// Matrix with columns c0, c1.
inline constexpr Mat2 from_cols(const Vec2& c0, const Vec2& c1) { return Mat2{{{c0[0], c1[0]}, {c0[1], c1[1]}}}; }

inline constexpr Vec2 column(const Mat2& m, int c) { return Vec2{m[0][c], m[1][c]}; }

/// Eigenvalues of the symmetric part of m, ascending.
inline std::array<double, 2> sym_eigenvalues(const Mat2& m) {
  const double a = m[0][0];
  const double d = m[1][1];
  const double b = 0.5 * (m[0][1] + m[1][0]);
  const double mean = 0.5 * (a + d);
  const double rad = std::hypot(0.5 * (a - d), b);
  return {mean - rad, mean + rad};
}

inline bool all_finite(const Mat2& m) {
  return std::isfinite(m[0][0]) && std::isfinite(m[0][1]) && std::isfinite(m[1][0]) && std::isfinite(m[1][1]);
}

inline bool all_finite(const Vec2& v) { return std::isfinite(v[0]) && std::isfinite(v[1]); }

}  // namespace mcomp

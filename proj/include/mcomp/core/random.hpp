#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mcomp {

/// Philox4x32-10 counter-based generator (Salmon et al.). A (key, counter)
/// pair maps to four independent 32-bit words, so any (seed, path, step)
/// stream can be reproduced without sequential state.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  Counter operator()(Counter ctr) const {
    Key k = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, k);
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  Key key_;
};

/// Two independent standard normals for (path, step) under the given generator.
inline std::array<double, 2> normal_pair(const Philox4x32& gen, std::uint64_t path, std::uint64_t step) {
  const auto out = gen({static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                        static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)});
  const std::uint64_t a = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  const std::uint64_t b = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
  // 53-bit uniforms in (0, 1] and [0, 1)
  const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  return {rad * std::cos(ang), rad * std::sin(ang)};
}

/// Halton low-discrepancy sequence in up to 4 dimensions (bases 2, 3, 5, 7).
class Halton {
 public:
  static double radical_inverse(std::uint64_t index, unsigned base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (index > 0) {
      r += f * static_cast<double>(index % base);
      index /= base;
      f *= inv;
    }
    return r;
  }

  /// Point `index` (1-based to skip the origin) in [0,1)^dim.
  static std::array<double, 4> point(std::uint64_t index) {
    return {radical_inverse(index, 2), radical_inverse(index, 3), radical_inverse(index, 5),
            radical_inverse(index, 7)};
  }
};

}  // namespace mcomp

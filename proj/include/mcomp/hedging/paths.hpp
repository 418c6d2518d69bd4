#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mcomp/core/errors.hpp"
#include "mcomp/core/parallel.hpp"
#include "mcomp/core/random.hpp"
#include "mcomp/model/diffusion_model.hpp"

namespace mcomp::hedging {

struct SimulationOptions {
  int n_paths = 1000;
  int n_steps = 64;
  std::uint64_t seed = 1;
  /// Paths 2i and 2i+1 use opposite Brownian increments.
  bool antithetic = false;
  int workers = 1;

  void check() const {
    if (n_paths < 1 || n_steps < 1) throw std::invalid_argument("simulation: n_paths and n_steps must be >= 1");
  }
};

/// Euler-Maruyama paths on the uniform grid t_k = k / n_steps, with the
/// Brownian increments and the trapezoidal discount D_k = exp(-int_0^{t_k} r).
struct PathBundle {
  int n_paths = 0;
  int n_steps = 0;
  std::uint64_t seed = 0;
  bool antithetic = false;
  std::vector<double> times;
  std::vector<Vec2> x;          // (n_steps + 1) per path
  std::vector<Vec2> dw;         // n_steps per path
  std::vector<double> discount; // (n_steps + 1) per path
  std::vector<unsigned char> valid;
  int invalid_count = 0;

  const Vec2& X(int p, int k) const { return x[static_cast<std::size_t>(p) * (n_steps + 1) + k]; }
  const Vec2& dW(int p, int k) const { return dw[static_cast<std::size_t>(p) * n_steps + k]; }
  double D(int p, int k) const { return discount[static_cast<std::size_t>(p) * (n_steps + 1) + k]; }
};

namespace detail {

/// Brownian increment of `path` over fine step `step` with variance dt per component.
inline Vec2 increment(const Philox4x32& gen, std::uint64_t path, std::uint64_t step, double dt, bool antithetic) {
  const std::uint64_t base = antithetic ? path / 2 : path;
  const double sign = antithetic && (path & 1u) ? -1.0 : 1.0;
  const auto z = normal_pair(gen, base, step);
  const double s = sign * std::sqrt(dt);
  return {s * z[0], s * z[1]};
}

/// Increments of one path on n_steps uniform steps.
inline void increments(const Philox4x32& gen, std::uint64_t path, int n_steps, bool antithetic, Vec2* out) {
  const double dt = 1.0 / n_steps;
  for (int k = 0; k < n_steps; ++k) out[k] = increment(gen, path, static_cast<std::uint64_t>(k), dt, antithetic);
}

/// Sums blocks of `factor` consecutive fine increments.
inline std::vector<Vec2> coarsen(const std::vector<Vec2>& fine, int factor) {
  if (factor < 1 || fine.size() % static_cast<std::size_t>(factor) != 0)
    throw std::invalid_argument("coarsen: factor must divide the number of fine steps");
  std::vector<Vec2> out(fine.size() / factor, Vec2{0.0, 0.0});
  for (std::size_t k = 0; k < fine.size(); ++k) {
    out[k / factor][0] += fine[k][0];
    out[k / factor][1] += fine[k][1];
  }
  return out;
}

/// Euler-Maruyama with trapezoidal discounting along given increments.
/// Returns false when a coefficient or the state becomes non-finite.
inline bool euler(const model::DiffusionModel& m, int n_steps, const Vec2* dw, Vec2* x, double* D) {
  const double dt = 1.0 / n_steps;
  x[0] = m.x0;
  D[0] = 1.0;
  try {
    model::Coefficients c = model::eval_coeffs(m, 0.0, x[0]);
    for (int k = 0; k < n_steps; ++k) {
      const Vec2 diff = c.sigma * dw[k];
      x[k + 1] = {x[k][0] + c.b[0] * dt + diff[0], x[k][1] + c.b[1] * dt + diff[1]};
      if (!all_finite(x[k + 1])) return false;
      const double r0 = c.r;
      c = model::eval_coeffs(m, static_cast<double>(k + 1) / n_steps, x[k + 1]);
      D[k + 1] = D[k] * std::exp(-0.5 * (r0 + c.r) * dt);
    }
  } catch (const ModelError&) {
    return false;
  }
  return true;
}

}  // namespace detail

/// Deterministic given (seed, n_paths, n_steps, antithetic); the worker count
/// does not change the result.
inline PathBundle simulate_paths(const model::DiffusionModel& m, const SimulationOptions& opt) {
  opt.check();
  PathBundle b;
  b.n_paths = opt.n_paths;
  b.n_steps = opt.n_steps;
  b.seed = opt.seed;
  b.antithetic = opt.antithetic;
  b.times.resize(opt.n_steps + 1);
  for (int k = 0; k <= opt.n_steps; ++k) b.times[k] = static_cast<double>(k) / opt.n_steps;
  const std::size_t np = static_cast<std::size_t>(opt.n_paths);
  b.x.resize(np * (opt.n_steps + 1));
  b.dw.resize(np * opt.n_steps);
  b.discount.resize(np * (opt.n_steps + 1));
  b.valid.assign(np, 1);
  const Philox4x32 gen(opt.seed);
  parallel_for(np, opt.workers, [&](std::size_t p) {
    Vec2* dw = b.dw.data() + p * opt.n_steps;
    detail::increments(gen, p, opt.n_steps, opt.antithetic, dw);
    b.valid[p] = detail::euler(m, opt.n_steps, dw, b.x.data() + p * (opt.n_steps + 1),
                               b.discount.data() + p * (opt.n_steps + 1));
  });
  for (auto v : b.valid) b.invalid_count += v ? 0 : 1;
  return b;
}

}  // namespace mcomp::hedging

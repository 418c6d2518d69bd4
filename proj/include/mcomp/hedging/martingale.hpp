#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "mcomp/hedging/paths.hpp"
#include "mcomp/pde/value_field.hpp"

namespace mcomp::hedging {

/// Sample mean and standard error; for antithetic runs the samples are pair averages.
struct MeanEstimate {
  double target = 0.0;
  double mean = 0.0;
  double se = 0.0;
  double z = 0.0;
  bool within(double n_se) const { return std::abs(mean - target) <= n_se * se; }
};

struct MartingaleOptions {
  int n_paths = 100000;
  int n_steps = 256;
  std::uint64_t seed = 1;
  bool antithetic = false;
  int workers = 1;
  double n_se = 3.0;
  /// Optional extra discounted asset a(X_1, D_1) whose mean should equal `extra_target`.
  std::function<double(const Vec2&, double)> extra_asset;
  double extra_target = 0.0;
  std::string extra_name = "extra";
};

struct MartingaleReport {
  int n_paths = 0;
  int n_steps = 0;
  int invalid_paths = 0;
  double n_se = 3.0;
  MeanEstimate claim;    // D_1 g(X_1) against v(0, X_0)
  MeanEstimate forward;  // S^F_1 against S^F_0
  std::optional<MeanEstimate> extra;
  std::string extra_name;
  std::vector<double> times;
  std::vector<MeanEstimate> claim_path;  // v(t_k, X_k) D_k against v(0, X_0)
  double max_abs_z_claim_path = 0.0;
  long lookups = 0;
  long clipped_lookups = 0;
  bool passed = false;
};

namespace detail {

struct Moments {
  double s = 0.0, s2 = 0.0;
  long n = 0;
  void add(double v) { s += v, s2 += v * v, ++n; }
  void merge(const Moments& o) { s += o.s, s2 += o.s2, n += o.n; }
  MeanEstimate estimate(double target) const {
    MeanEstimate e;
    e.target = target;
    if (n == 0) return e;
    e.mean = s / n;
    const double var = n > 1 ? std::max(0.0, (s2 - n * e.mean * e.mean) / (n - 1)) : 0.0;
    e.se = std::sqrt(var / n);
    e.z = e.se > 0.0 ? (e.mean - target) / e.se : 0.0;
    return e;
  }
};

struct BlockSums {
  Moments claim, forward, extra;
  std::vector<Moments> path;
  int invalid = 0;
  long lookups = 0, clipped = 0;
};

}  // namespace detail

/// Feynman-Kac and martingale check by streaming Euler paths in fixed blocks;
/// results do not depend on the worker count.
inline MartingaleReport martingale_check(const model::DiffusionModel& m, const pde::ValueField& v,
                                         const MartingaleOptions& opt) {
  if (opt.n_paths < 1 || opt.n_steps < 1) throw std::invalid_argument("martingale_check: n_paths and n_steps >= 1");
  if (opt.antithetic && opt.n_paths % 2 != 0) throw std::invalid_argument("martingale_check: antithetic needs even n_paths");
  const int n = opt.n_steps;
  const double dt = 1.0 / n;
  constexpr int block = 512;
  const int n_blocks = (opt.n_paths + block - 1) / block;
  const Philox4x32 gen(opt.seed);
  const Box& box = v.grid().box;
  const double v0 = v.interpolate(0.0, m.x0);
  const double sf0 = m.forward.eval(0.0, m.x0);
  std::vector<detail::BlockSums> sums(n_blocks);

  parallel_for(static_cast<std::size_t>(n_blocks), opt.workers, [&](std::size_t b) {
    auto& acc = sums[b];
    acc.path.assign(n + 1, {});
    std::vector<Vec2> dw(n), x(n + 1);
    std::vector<double> D(n + 1);
    const int p_end = std::min(opt.n_paths, static_cast<int>((b + 1) * block));
    const int stride = opt.antithetic ? 2 : 1;
    std::vector<double> path_vals(n + 1);
    for (int p = static_cast<int>(b * block); p < p_end; p += stride) {
      double claim = 0.0, fwd = 0.0, extra = 0.0;
      std::fill(path_vals.begin(), path_vals.end(), 0.0);
      bool ok = true;
      for (int q = p; q < p + stride; ++q) {
        detail::increments(gen, static_cast<std::uint64_t>(q), n, opt.antithetic, dw.data());
        if (!detail::euler(m, n, dw.data(), x.data(), D.data())) {
          ok = false;
          break;
        }
        double sf = sf0;
        for (int k = 0; k < n; ++k) {
          const auto c = model::eval_coeffs(m, k * dt, x[k]);
          const Jet fj = m.forward.jet(k * dt, x[k]);
          sf += D[k] * dot(row_times(Vec2{fj.x[0], fj.x[1]}, c.sigma), dw[k]);
          ++acc.lookups;
          if (!box.contains(x[k])) ++acc.clipped;
          path_vals[k] += D[k] * v.interpolate(k * dt, x[k]);
        }
        const double g1 = D[n] * m.payoff(x[n]);
        path_vals[n] += g1;
        claim += g1;
        fwd += sf;
        if (opt.extra_asset) extra += opt.extra_asset(x[n], D[n]);
      }
      if (!ok) {
        acc.invalid += stride;
        continue;
      }
      acc.claim.add(claim / stride);
      acc.forward.add(fwd / stride);
      if (opt.extra_asset) acc.extra.add(extra / stride);
      for (int k = 0; k <= n; ++k) acc.path[k].add(path_vals[k] / stride);
    }
  });

  detail::BlockSums total;
  total.path.assign(n + 1, {});
  for (const auto& s : sums) {
    total.claim.merge(s.claim);
    total.forward.merge(s.forward);
    total.extra.merge(s.extra);
    for (int k = 0; k <= n; ++k) total.path[k].merge(s.path[k]);
    total.invalid += s.invalid;
    total.lookups += s.lookups;
    total.clipped += s.clipped;
  }
  MartingaleReport r;
  r.n_paths = opt.n_paths;
  r.n_steps = n;
  r.n_se = opt.n_se;
  r.invalid_paths = total.invalid;
  r.claim = total.claim.estimate(v0);
  r.forward = total.forward.estimate(sf0);
  if (opt.extra_asset) {
    r.extra = total.extra.estimate(opt.extra_target);
    r.extra_name = opt.extra_name;
  }
  for (int k = 0; k <= n; ++k) {
    r.times.push_back(k * dt);
    r.claim_path.push_back(total.path[k].estimate(v0));
    r.max_abs_z_claim_path = std::max(r.max_abs_z_claim_path, std::abs(r.claim_path.back().z));
  }
  r.lookups = total.lookups;
  r.clipped_lookups = total.clipped;
  r.passed = r.claim.within(opt.n_se) && r.forward.within(opt.n_se) && (!r.extra || r.extra->within(opt.n_se));
  return r;
}

inline nlohmann::json to_json(const MeanEstimate& e) {
  return {{"target", e.target}, {"mean", e.mean}, {"se", e.se}, {"z", e.z}};
}

inline nlohmann::json to_json(const MartingaleReport& r) {
  nlohmann::json j{{"n_paths", r.n_paths},
                   {"n_steps", r.n_steps},
                   {"invalid_paths", r.invalid_paths},
                   {"n_se", r.n_se},
                   {"claim_terminal", to_json(r.claim)},
                   {"forward_terminal", to_json(r.forward)},
                   {"max_abs_z_claim_path", r.max_abs_z_claim_path},
                   {"lookups", r.lookups},
                   {"clipped_lookups", r.clipped_lookups},
                   {"passed", r.passed}};
  if (r.extra) j[r.extra_name] = to_json(*r.extra);
  return j;
}

}  // namespace mcomp::hedging

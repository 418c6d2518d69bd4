#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcomp/core/box.hpp"
#include "mcomp/core/errors.hpp"
#include "mcomp/core/parallel.hpp"
#include "mcomp/core/quadrature.hpp"
#include "mcomp/jacobian/test_functions.hpp"
#include "mcomp/model/diffusion_model.hpp"
#include "mcomp/model/structural_operators.hpp"

namespace mcomp::jacobian {

struct PairingOptions {
  double t = 1.0;
  int gl_points = 8;
  /// Uniform cells per axis; test-function supports from the library are unions of these.
  int base_cells = 8;
  int coarse_sub = 2;
  int fine_sub = 4;
  /// Refinement disagreement above max(abs_tol, rel_tol |value|) marks the result low-confidence.
  double abs_tol = 1e-12;
  double rel_tol = 1e-6;
  int workers = 1;
};

struct PairingResult {
  enum class Method { quadrature, closed_form };

  double value = 0.0;
  double error_estimate = 0.0;
  bool low_confidence = false;
  Method method = Method::quadrature;
  std::string test_function_id;
  Box K;
};

inline std::string method_name(PairingResult::Method m) {
  return m == PairingResult::Method::quadrature ? "quadrature" : "closed_form";
}

inline nlohmann::json to_json(const PairingResult& r) {
  return {{"value", r.value},
          {"error_estimate", r.error_estimate},
          {"low_confidence", r.low_confidence},
          {"method", method_name(r.method)},
          {"test_function", r.test_function_id},
          {"K", {{"x1", {r.K.lo[0], r.K.hi[0]}}, {"x2", {r.K.lo[1], r.K.hi[1]}}}}};
}

namespace detail {

/// Uniform breaks of [lo, hi] into `cells` pieces plus `extra` when strictly inside.
inline std::vector<double> breaks(double lo, double hi, int cells, const double* extra) {
  std::vector<double> b;
  for (int c = 0; c <= cells; ++c) b.push_back(lo + (hi - lo) * c / cells);
  if (extra && *extra > lo && *extra < hi) {
    const double tol = 1e-12 * (hi - lo);
    bool dup = false;
    for (double x : b) dup = dup || std::abs(x - *extra) <= tol;
    if (!dup) {
      b.push_back(*extra);
      std::sort(b.begin(), b.end());
    }
  }
  return b;
}

}  // namespace detail

/// Tensor Gauss-Legendre evaluation of the pairing over a fixed rectangle K
/// at time t. The structural fields and h are sampled once per quadrature node
/// (two refinement levels) so that many test functions can be paired cheaply.
/// Cells never straddle h's kink locus.
///
/// generator convention:
///   B_K = int 1/2 A^{jk} d_j h d_k phi - (B^j - 1/2 d_k A^{jk}) d_j h phi + C h phi
/// parabolic convention (A, C from G = L^X - r):
///   A_K = int A^{jk} d_j h d_k phi - (B^j - d_k A^{jk}) d_j h phi - C h phi
class PairingIntegrator {
 public:
  PairingIntegrator(const model::DiffusionModel& m, const model::Payoff& h, const Box& K, PairingOptions opt = {},
                    model::Convention conv = model::Convention::generator)
      : K_(K), opt_(opt), conv_(conv) {
    K.check();
    if (!h.gradient) throw CapabilityError("pairing: h has no gradient accessor");
    coarse_ = sample(m, h, opt.coarse_sub);
    fine_ = sample(m, h, opt.fine_sub);
  }

  const Box& box() const { return K_; }

  PairingResult integrate(const TestFunction& phi) const {
    return integrate(phi.support(), [&](const Vec2& x) { return phi.eval(x); }, phi.id);
  }

  /// Pairing with an arbitrary test function given as x -> (value, gradient),
  /// vanishing outside `support`.
  PairingResult integrate(const Box& support, const std::function<std::pair<double, Vec2>(const Vec2&)>& phi,
                          const std::string& id = "custom") const {
    PairingResult r;
    r.K = K_;
    r.test_function_id = id;
    const double qc = sum(coarse_, phi, support), qf = sum(fine_, phi, support);
    r.value = qf;
    r.error_estimate = std::abs(qf - qc);
    r.low_confidence = r.error_estimate > std::max(opt_.abs_tol, opt_.rel_tol * std::abs(qf));
    return r;
  }

 private:
  struct Node {
    Vec2 x;
    double weight;
    double h;
    Vec2 grad_h;
    Mat2 A;
    Vec2 B;
    Vec2 divA;
    double C;
  };

  std::vector<Node> sample(const model::DiffusionModel& m, const model::Payoff& h, int sub) const {
    const double* kink1 = h.kink && h.kink->axis == 0 ? &h.kink->position : nullptr;
    const double* kink2 = h.kink && h.kink->axis == 1 ? &h.kink->position : nullptr;
    const auto b1 = detail::breaks(K_.lo[0], K_.hi[0], opt_.base_cells, kink1);
    const auto b2 = detail::breaks(K_.lo[1], K_.hi[1], opt_.base_cells, kink2);
    const GaussLegendre gl(opt_.gl_points);
    std::vector<std::pair<double, double>> q1, q2;
    gl.composite(b1, sub, [&](double x, double w) { q1.emplace_back(x, w); });
    gl.composite(b2, sub, [&](double x, double w) { q2.emplace_back(x, w); });
    std::vector<Node> nodes(q1.size() * q2.size());
    parallel_for(q1.size(), opt_.workers, [&](std::size_t a) {
      for (std::size_t b = 0; b < q2.size(); ++b) {
        Node& n = nodes[a * q2.size() + b];
        n.x = {q1[a].first, q2[b].first};
        n.weight = q1[a].second * q2[b].second;
        n.h = h.value(n.x);
        n.grad_h = h.gradient(n.x);
        const auto ops = model::structural_operators(m, opt_.t, n.x, conv_);
        n.A = ops.A;
        n.B = ops.B;
        n.divA = ops.divA;
        n.C = ops.C;
      }
    });
    return nodes;
  }

  double sum(const std::vector<Node>& nodes, const std::function<std::pair<double, Vec2>(const Vec2&)>& phi,
             const Box& s) const {
    const bool gen = conv_ == model::Convention::generator;
    const double ka = gen ? 0.5 : 1.0;
    const double kc = gen ? 1.0 : -1.0;
    double acc = 0.0;
    for (const Node& n : nodes) {
      if (!s.contains(n.x)) continue;
      const auto [p, gp] = phi(n.x);
      double term = kc * n.C * n.h * p;
      for (int j = 0; j < 2; ++j) {
        term -= (n.B[j] - ka * n.divA[j]) * n.grad_h[j] * p;
        for (int k = 0; k < 2; ++k) term += ka * n.A[j][k] * n.grad_h[j] * gp[k];
      }
      acc += n.weight * term;
    }
    return acc;
  }

  Box K_;
  PairingOptions opt_;
  model::Convention conv_;
  std::vector<Node> coarse_, fine_;
};

/// B_K[h, phi; t] by quadrature.
inline PairingResult pairing_BK(const model::DiffusionModel& m, const model::Payoff& h, const TestFunction& phi,
                                const Box& K, const PairingOptions& opt = {}) {
  return PairingIntegrator(m, h, K, opt, model::Convention::generator).integrate(phi);
}

/// A_K[h, phi; t] by quadrature, built from the fields of G = L^X - r.
inline PairingResult pairing_AK(const model::DiffusionModel& m, const model::Payoff& h, const TestFunction& phi,
                                const Box& K, const PairingOptions& opt = {}) {
  return PairingIntegrator(m, h, K, opt, model::Convention::parabolic).integrate(phi);
}

/// Throws CapabilityError unless the model declares the call reduction and
/// a^{11}, b^1 do not depend on x1 at time t (checked at sample points).
inline void require_call_reduction(const model::DiffusionModel& m, const Box& K, double t = 1.0) {
  if (!m.call_reduction) throw CapabilityError("pairing_call_closed_form: model has no call reduction");
  for (int s = 0; s <= 4; ++s) {
    const double y = K.lo[1] + K.width(1) * s / 4.0;
    const auto c0 = model::eval_coeffs(m, t, {K.lo[0], y});
    const auto c1 = model::eval_coeffs(m, t, {K.hi[0], y});
    const double tol = 1e-12 * (1.0 + std::abs(c0.a[0][0]) + std::abs(c0.b[0]));
    if (std::abs(c0.a[0][0] - c1.a[0][0]) > tol || std::abs(c0.b[0] - c1.b[0]) > tol)
      throw CapabilityError("pairing_call_closed_form: coefficients depend on x1 at t = 1");
  }
}

/// -1/2 (e^{-r} Gamma)^2 int (d a^{11} / d x2)(1, log Gamma, x2) phi(log Gamma, x2) dx2
/// over K's x2-range, by composite Gauss-Legendre.
inline PairingResult pairing_call_closed_form(const model::DiffusionModel& m, double Gamma, const TestFunction& phi,
                                              const Box& K, const PairingOptions& opt = {}) {
  require_call_reduction(m, K, opt.t);
  const double k = std::log(Gamma);
  if (!(k > K.lo[0] && k < K.hi[0])) throw std::invalid_argument("pairing_call_closed_form: log(Gamma) outside K");
  const double pref = -0.5 * std::pow(std::exp(-m.call_reduction->rate) * Gamma, 2);
  const GaussLegendre gl(opt.gl_points);
  const auto b = detail::breaks(K.lo[1], K.hi[1], opt.base_cells, nullptr);
  auto integral = [&](int sub) {
    double acc = 0.0;
    gl.composite(b, sub, [&](double y, double w) {
      const Vec2 x{k, y};
      const auto a = m.covariance_jets(opt.t, x);
      acc += w * a[0][0].x[1] * phi(x);
    });
    return pref * acc;
  };
  PairingResult r;
  r.method = PairingResult::Method::closed_form;
  r.K = K;
  r.test_function_id = phi.id;
  const double qc = integral(opt.coarse_sub);
  r.value = integral(opt.fine_sub);
  r.error_estimate = std::abs(r.value - qc);
  r.low_confidence = r.error_estimate > std::max(opt.abs_tol, opt.rel_tol * std::abs(r.value));
  return r;
}

}  // namespace mcomp::jacobian

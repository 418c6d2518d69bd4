#pragma once

#include <cmath>
#include <limits>

#include "mcomp/core/random.hpp"
#include "mcomp/model/diffusion_model.hpp"
#include "mcomp/model/report.hpp"

namespace mcomp::model {

/// Quasi-random probe of the standing assumptions over `box` x [0, 1].
///
/// Failures are recorded as rows, never thrown. A coefficient that evaluates
/// to NaN/Inf marks the row `coefficients.finite` as failed with its location.
inline ValidationReport validate_assumptions(const DiffusionModel& m, const Box& box, int n_probes = 4096) {
  box.check();
  if (n_probes < 1) throw std::invalid_argument("validate_assumptions: n_probes must be >= 1");
  const auto& env = m.envelope;
  constexpr double inf = std::numeric_limits<double>::infinity();

  CheckRow finite = make_row("coefficients.finite", "all coefficients finite at probes", 0.0, 0.0);
  CheckRow inv = make_row("A1.invertibility", "max ||sigma^-1||_F over probes <= N_inv", 0.0, env.n_inv);
  CheckRow ell = make_row("A1.ellipticity", "min eigenvalue of a over probes >= 1/N_inv^2", inf,
                          1.0 / (env.n_inv * env.n_inv));
  CheckRow sym = make_row("A1.symmetry", "max |a12 - a21| over probes", 0.0, 0.0);
  CheckRow rate = make_row("A2.nonnegative_rate", "min r over probes >= 0", inf, 0.0);
  CheckRow fgrowth = make_row("A3.forward_growth", "max |D^k f| exp(-N(1+|x|)), 1<=k<=3, over probes <= 1", 0.0, 1.0);
  CheckRow growth = make_row("A4.growth", "max |dg/dx_j| exp(-N(1+|x|)) over probes <= 1", 0.0, 1.0);

  for (int p = 1; p <= n_probes; ++p) {
    const auto u = Halton::point(static_cast<std::uint64_t>(p));
    const Vec2 x = box.at(u[0], u[1]);
    const double t = u[2];
    const Witness here{t, x};
    Coefficients c;
    try {
      c = eval_coeffs(m, t, x);
    } catch (const ModelError& e) {
      if (finite.passed) {
        finite.passed = false;
        finite.witness = here;
        finite.note = e.what();
      }
      continue;
    }
    const auto sinv = inverse(c.sigma);
    const double ninv = sinv ? frobenius(*sinv) : inf;
    if (!inv.witness || ninv > inv.value) {
      inv.value = ninv;
      inv.witness = here;
    }
    const double lmin = sym_eigenvalues(c.a)[0];
    if (lmin < ell.value) {
      ell.value = lmin;
      ell.witness = here;
    }
    sym.value = std::max(sym.value, std::abs(c.a[0][1] - c.a[1][0]));
    if (c.r < rate.value) {
      rate.value = c.r;
      rate.witness = here;
    }
    const double weight = std::exp(-env.n_growth * (1.0 + norm(x)));
    if (m.forward.x_order() >= 1) {
      const Jet f = m.forward.jet(t, x);
      double worst = 0.0;
      for (int j = 0; j < 2; ++j) {
        worst = std::max(worst, std::abs(f.x[j]));
        if (m.forward.x_order() >= 2)
          for (int k = 0; k < 2; ++k) worst = std::max(worst, std::abs(f.xx[j][k]));
      }
      if (m.forward.x_order() >= 3)
        for (double d : f.xxx) worst = std::max(worst, std::abs(d));
      if (worst * weight > fgrowth.value) {
        fgrowth.value = worst * weight;
        fgrowth.witness = here;
      }
    }
    if (!m.payoff.kink || !m.payoff.kink->contains(x)) {
      const Vec2 g = m.payoff.gradient(x);
      const double gw = std::max(std::abs(g[0]), std::abs(g[1])) * weight;
      if (gw > growth.value) {
        growth.value = gw;
        growth.witness = here;
      }
    }
  }
  inv.passed = std::isfinite(inv.bound) && inv.value <= inv.bound;
  ell.passed = ell.bound > 0.0 && ell.value >= ell.bound;
  if (!std::isfinite(env.n_inv)) inv.note = ell.note = "no finite N_inv in the model envelope";
  sym.passed = sym.value == 0.0;
  rate.passed = rate.value >= 0.0;
  fgrowth.passed = fgrowth.value <= fgrowth.bound;
  growth.passed = growth.value <= growth.bound;

  ValidationReport rep;
  rep.n_probes = n_probes;
  rep.rows = {finite, inv, ell, sym, rate, fgrowth, growth};
  return rep;
}

}  // namespace mcomp::model

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcomp/hedging/hedge.hpp"
#include "mcomp/hedging/martingale.hpp"
#include "mcomp/jacobian/completeness.hpp"
#include "mcomp/jacobian/jacobian_field.hpp"
#include "mcomp/model/validate.hpp"
#include "mcomp/pde/export.hpp"
#include "mcomp/pde/residual.hpp"
#include "mcomp/pde/solver.hpp"
#include "mcomp/stochvol/model.hpp"

namespace mcomp::stochvol {

struct GridSpec {
  int n1 = 201;
  int n2 = 81;
  int n_t = 256;
  /// Box half-width in standard deviations of x at t = 1.
  double k = 6.0;
};

struct MCSettings {
  int n_paths = 10000;
  std::uint64_t seed = 1;
  bool antithetic = false;
  std::vector<int> step_levels{64, 128, 256, 512};
  double tol_rel = 1e-6;
  double fallback_bound = 1e-3;
  /// Paths for the martingale / Feynman-Kac check; 0 skips it.
  int martingale_paths = 0;
  int martingale_steps = 256;
};

struct FlagshipOptions {
  GridSpec grid;
  MCSettings mc;
  int workers = 1;
  double rank_tol_rel = 1e-6;
  double rank_max_fraction = 1e-3;
  double window_lo = 0.05, window_hi = 0.95;
  /// |put - (call - e^{-r} (P0 - Gamma e^{-r}))| allowed, relative to Gamma.
  double parity_tol = 5e-3;
  jacobian::CompletenessOptions completeness;
};

struct ParityCheck {
  double call = 0.0;
  double put = 0.0;
  double implied_put = 0.0;
  double abs_error = 0.0;
  bool passed = false;
};

struct FlagshipReport {
  StochVolParams params;
  pde::SpaceTimeGrid grid;
  ValidationReport validation;
  ValidationReport c1;
  pde::SolveStats solve_stats;
  double call_price = 0.0;
  jacobian::RankDiagnostics rank;
  double window_max_fraction = 0.0;
  bool window_passed = false;
  pde::ResidualReport det_residual;
  jacobian::CompletenessReport completeness;
  hedging::HedgeReport digital;
  hedging::HedgeReport put;
  ParityCheck parity;
  std::optional<hedging::MartingaleReport> martingale;
  std::vector<std::string> warnings;
  /// Fields kept for the CSV bundle.
  pde::ValueField v;
  std::optional<jacobian::JacobianField> jf;
};

namespace detail {

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace detail

/// validate -> solve (call) -> Jacobian diagnostics and determinant-evolution
/// residual -> completeness -> hedge a digital and a put.
inline FlagshipReport run_flagship(const StochVolParams& params, const FlagshipOptions& opt = {}) {
  FlagshipReport rep;
  rep.params = params;
  const auto m = detail::stage("build", [&] { return build_stochvol_model(params); });
  rep.grid = detail::stage("grid", [&] { return pde::make_grid(m, opt.grid.n1, opt.grid.n2, opt.grid.n_t, opt.grid.k); });
  rep.validation = detail::stage("validate", [&] { return model::validate_assumptions(m, rep.grid.box); });
  rep.c1 = detail::stage("verify_C1", [&] { return verify_C1(params); });
  if (!rep.validation.passed()) rep.warnings.push_back("assumption validation has failing rows");
  if (!rep.c1.passed()) rep.warnings.push_back("regularity condition C1 has failing rows");

  pde::SolveOptions so;
  so.workers = opt.workers;
  rep.v = detail::stage("solve", [&] { return pde::solve_backward(m, rep.grid, m.payoff, so, &rep.solve_stats); });
  rep.call_price = rep.v.interpolate(0.0, m.x0);
  for (const auto& w : rep.solve_stats.warnings) rep.warnings.push_back("solve: " + w);

  detail::stage("jacobian", [&] {
    rep.jf = jacobian::jacobian_field(m, rep.v);
    rep.rank = jacobian::rank_diagnostics(*rep.jf, opt.rank_tol_rel, opt.rank_max_fraction);
    rep.det_residual = jacobian::determinant_evolution_residual(m, m.forward, rep.v);
    return 0;
  });
  for (std::size_t k = 0; k < rep.rank.times.size(); ++k) {
    const double t = rep.rank.times[k];
    if (t >= opt.window_lo - 1e-12 && t <= opt.window_hi + 1e-12)
      rep.window_max_fraction = std::max(rep.window_max_fraction, rep.rank.near_singular_fraction[k]);
  }
  rep.window_passed = rep.window_max_fraction <= opt.rank_max_fraction;
  if (!rep.window_passed) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "near-singular fraction %.3g exceeds %g inside [%g, %g]", rep.window_max_fraction,
                  opt.rank_max_fraction, opt.window_lo, opt.window_hi);
    rep.warnings.push_back(buf);
  }

  rep.completeness = detail::stage("completeness", [&] { return jacobian::completeness_check(m, rep.grid.box, opt.completeness); });

  const double disc = std::exp(-params.r);
  const auto digital = model::digital_payoff(params.Gamma);
  const auto put = model::put_payoff(params.Gamma, disc);
  hedging::HedgeOptions ho;
  ho.tol_rel = opt.mc.tol_rel;
  ho.fallback_bound = opt.mc.fallback_bound;
  ho.workers = opt.workers;
  ho.keep_path_errors = true;
  hedging::ReplicationPlan plan;
  plan.n_paths = opt.mc.n_paths;
  plan.seed = opt.mc.seed;
  plan.antithetic = opt.mc.antithetic;
  plan.step_levels = opt.mc.step_levels;
  const auto u_put = detail::stage("solve_put", [&] { return pde::solve_backward(m, rep.grid, put, so); });
  rep.digital = detail::stage("hedge_digital", [&] {
    const auto u = pde::solve_backward(m, rep.grid, digital, so);
    return hedging::replicate_convergence(m, digital, rep.v, u, plan, ho);
  });
  rep.put = detail::stage("hedge_put", [&] { return hedging::replicate_convergence(m, put, rep.v, u_put, plan, ho); });
  for (const auto& w : rep.digital.warnings) rep.warnings.push_back("digital hedge: " + w);
  for (const auto& w : rep.put.warnings) rep.warnings.push_back("put hedge: " + w);

  rep.parity.call = rep.call_price;
  rep.parity.put = u_put.interpolate(0.0, m.x0);
  rep.parity.implied_put = rep.call_price - disc * (params.P0 - params.Gamma * disc);
  rep.parity.abs_error = std::abs(rep.parity.put - rep.parity.implied_put);
  rep.parity.passed = rep.parity.abs_error <= opt.parity_tol * params.Gamma;

  if (opt.mc.martingale_paths > 0) {
    rep.martingale = detail::stage("martingale", [&] {
      hedging::MartingaleOptions mo;
      mo.n_paths = opt.mc.martingale_paths;
      mo.n_steps = opt.mc.martingale_steps;
      mo.seed = opt.mc.seed;
      mo.antithetic = opt.mc.antithetic;
      mo.workers = opt.workers;
      mo.extra_asset = [params](const Vec2& x, double) { return discounted_stock(params, 1.0, x); };
      mo.extra_target = params.P0;
      mo.extra_name = "discounted_stock";
      return hedging::martingale_check(m, rep.v, mo);
    });
  }
  return rep;
}

inline nlohmann::json to_json(const ParityCheck& p) {
  return {{"call", p.call}, {"put", p.put}, {"implied_put", p.implied_put}, {"abs_error", p.abs_error}, {"passed", p.passed}};
}

inline nlohmann::json to_json(const FlagshipReport& r) {
  nlohmann::json j{{"params", to_json(r.params)},
                   {"grid", pde::grid_json(r.grid)},
                   {"validation", mcomp::to_json(r.validation)},
                   {"c1", mcomp::to_json(r.c1)},
                   {"call_price", r.call_price},
                   {"rank_diagnostics", jacobian::to_json(r.rank)},
                   {"window_max_near_singular_fraction", r.window_max_fraction},
                   {"window_passed", r.window_passed},
                   {"det_evolution_residual", pde::residual_json(r.det_residual)},
                   {"completeness", jacobian::to_json(r.completeness)},
                   {"hedge_digital", hedging::to_json(r.digital)},
                   {"hedge_put", hedging::to_json(r.put)},
                   {"put_call_parity", to_json(r.parity)},
                   {"warnings", r.warnings}};
  if (r.martingale) j["martingale"] = hedging::to_json(*r.martingale);
  return j;
}

/// Writes model.json, validation.json, price.csv (t = 0), det.csv (t = 0, 0.5),
/// verdict.json, hedge_convergence.csv (digital), hedge_convergence_put.csv,
/// hedge_errors.csv (digital) and report.json into `dir`.
inline void write_bundle(const FlagshipReport& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto dump = [&](const std::string& name, const nlohmann::json& j) {
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw std::runtime_error("cannot open " + (fs::path(dir) / name).string());
    out << j.dump(2) << '\n';
  };
  dump("model.json", {{"params", to_json(r.params)}, {"grid", pde::grid_json(r.grid)}});
  dump("validation.json", {{"assumptions", mcomp::to_json(r.validation)}, {"c1", mcomp::to_json(r.c1)}});
  dump("verdict.json", jacobian::to_json(r.completeness));
  dump("report.json", to_json(r));
  pde::write_value_csv(r.v, (fs::path(dir) / "price.csv").string(), 0);
  if (r.jf) jacobian::write_det_csv(*r.jf, (fs::path(dir) / "det.csv").string(), {0, r.grid.n_t / 2});
  hedging::write_convergence_csv(r.digital, (fs::path(dir) / "hedge_convergence.csv").string());
  hedging::write_convergence_csv(r.put, (fs::path(dir) / "hedge_convergence_put.csv").string());
  hedging::write_errors_csv(r.digital, (fs::path(dir) / "hedge_errors.csv").string());
}

}  // namespace mcomp::stochvol

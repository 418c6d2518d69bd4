#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "mcomp/cli/config.hpp"
#include "mcomp/core/parallel.hpp"
#include "mcomp/hedging/hedge.hpp"
#include "mcomp/hedging/martingale.hpp"
#include "mcomp/jacobian/completeness.hpp"
#include "mcomp/jacobian/jacobian_field.hpp"
#include "mcomp/model/validate.hpp"
#include "mcomp/pde/export.hpp"
#include "mcomp/pde/residual.hpp"
#include "mcomp/pde/solver.hpp"
#include "mcomp/stochvol/flagship.hpp"
#include "mcomp/validation/envelope.hpp"
#include "mcomp/validation/time_probe.hpp"

namespace mcomp::cli {

enum ExitCode : int { kOk = 0, kDiagnosticFailure = 1, kConfigError = 2 };

/// Command-line overrides applied on top of the config file.
struct Invocation {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string format = "csv";
  std::string target = "digital";
};

struct Context {
  RunConfig cfg;
  std::filesystem::path out;
  int workers = 1;
  std::string format;
};

namespace detail {

inline void dump(const std::filesystem::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot open " + p.string());
  out << j.dump(2) << '\n';
}

inline json box_json(const Box& b) { return {{"x1", {b.lo[0], b.hi[0]}}, {"x2", {b.lo[1], b.hi[1]}}}; }

inline json model_json(const ModelSpec& s) {
  json j{{"kind", s.kind}};
  if (s.kind == "stochvol") j["params"] = stochvol::to_json(s.sv);
  if (s.kind == "lognormal")
    j["params"] = {{"nu", s.nu}, {"vol2", s.vol2}, {"r", s.r}, {"strike", s.strike}, {"x0", {s.x0[0], s.x0[1]}}};
  if (s.payoff) {
    j["payoff"] = {{"kind", s.payoff->kind}};
    if (s.payoff->kind == "constant") j["payoff"]["value"] = s.payoff->value;
    else j["payoff"]["strike"] = s.payoff->strike, j["payoff"]["discounted"] = s.payoff->discounted;
  }
  return j;
}

/// Renames "analytic.<rest>" to "analytic.<name>.<rest>".
inline void tag_rows(ValidationReport& rep, const std::string& name) {
  for (auto& row : rep.rows)
    if (row.id.rfind("analytic.", 0) == 0) row.id = "analytic." + name + "." + row.id.substr(9);
}

inline pde::ValueField solve(const model::DiffusionModel& m, const pde::SpaceTimeGrid& grid, const model::Payoff& g,
                             int workers, pde::SolveStats* stats = nullptr) {
  pde::SolveOptions so;
  so.workers = workers;
  return pde::solve_backward(m, grid, g, so, stats);
}

inline pde::SpaceTimeGrid grid_for(const model::DiffusionModel& m, const stochvol::GridSpec& g) {
  return pde::make_grid(m, g.n1, g.n2, g.n_t, g.k);
}

}  // namespace detail

/// validate: assumption probes, (C1) for the stochastic volatility market,
/// envelope propagation for its coefficients and heuristic time-analyticity
/// rows. Exit 0 iff every non-heuristic row passes.
inline int cmd_validate(const Context& c, json& summary) {
  const auto& s = c.cfg.model;
  const auto m = build_model(s, false);
  const Box box = c.cfg.diagnostics.box ? *c.cfg.diagnostics.box : pde::default_box(m, c.cfg.grid.k);
  ValidationReport all = model::validate_assumptions(m, box, c.cfg.diagnostics.n_probes);
  json sections{{"assumptions", mcomp::to_json(all)}};

  if (s.kind == "stochvol") {
    const auto c1 = stochvol::verify_C1(s.sv);
    sections["c1"] = mcomp::to_json(c1);
    all.rows.insert(all.rows.end(), c1.rows.begin(), c1.rows.end());
    if (s.sv.alpha != 0.0) {
      json env = json::array();
      const std::pair<const char*, const Smooth1D*> coeffs[] = {
          {"nu", &s.sv.nu}, {"sigma1", &s.sv.sigma1}, {"sigma2", &s.sv.sigma2}};
      for (const auto& [name, fn] : coeffs) {
        const auto pair = validation::shifted_exp_pair(name, *fn, s.sv.alpha, s.sv.m, box.lo[1], box.hi[1]);
        auto rep = validation::envelope_check_composition(
            pair, validation::shifted_exp_envelope(s.sv.alpha, s.sv.c1.D, s.sv.c1.rho, s.sv.c1.epsilon));
        detail::tag_rows(rep.rows, name);
        env.push_back(validation::to_json(rep));
        all.rows.insert(all.rows.end(), rep.rows.rows.begin(), rep.rows.rows.end());
      }
      sections["analytic_envelope"] = env;
    }
  }

  validation::ProbeOptions po;
  po.order = c.cfg.diagnostics.time_probe.order;
  po.workers = c.workers;
  ValidationReport plaus;
  validation::append_time_analyticity(plaus, m, c.cfg.diagnostics.time_probe.t, c.cfg.diagnostics.time_probe.x, po);
  sections["plausibility"] = {{"label", "HEURISTIC"}, {"rows", mcomp::to_json(plaus)["rows"]}};
  all.rows.insert(all.rows.end(), plaus.rows.begin(), plaus.rows.end());
  all.n_probes = c.cfg.diagnostics.n_probes;

  const bool ok = all.passed();
  json out{{"model", detail::model_json(s)}, {"box", detail::box_json(box)}, {"passed", ok}};
  out.update(sections);
  out["rows"] = mcomp::to_json(all)["rows"];
  detail::dump(c.out / "validation.json", out);

  json failing = json::array();
  for (const auto& r : all.rows)
    if (!r.heuristic && !r.passed) failing.push_back(r.id);
  summary["passed"] = ok;
  summary["failing_rows"] = failing;
  return ok ? kOk : kDiagnosticFailure;
}

/// price: solves the pricing PDE for the model payoff and writes the value
/// field at the configured levels plus a residual summary.
inline int cmd_price(const Context& c, json& summary) {
  const auto m = build_model(c.cfg.model);
  const auto grid = detail::grid_for(m, c.cfg.grid);
  pde::SolveStats stats;
  const auto v = detail::solve(m, grid, m.payoff, c.workers, &stats);
  const auto res = pde::pde_residual(m, v);
  const double price = v.interpolate(0.0, m.x0);
  bool finite = true;
  for (double d : v.data()) finite = finite && std::isfinite(d);

  if (c.format == "json") detail::dump(c.out / "price.json", pde::value_json(v, c.cfg.output.price_levels));
  else pde::write_value_csv(v, (c.out / "price.csv").string(), c.cfg.output.price_levels);
  json s{{"model", detail::model_json(c.cfg.model)},
         {"grid", pde::grid_json(grid)},
         {"price_at_x0", price},
         {"x0", {m.x0[0], m.x0[1]}},
         {"residual", pde::residual_json(res)},
         {"steps", stats.steps},
         {"max_cross_ratio", stats.max_cross_ratio},
         {"warnings", stats.warnings},
         {"finite", finite}};
  detail::dump(c.out / "price_summary.json", s);
  summary["price_at_x0"] = price;
  return finite ? kOk : kDiagnosticFailure;
}

/// complete: the completeness verdict; optionally the determinant field.
inline int cmd_complete(const Context& c, json& summary) {
  const auto m = build_model(c.cfg.model);
  const auto grid = detail::grid_for(m, c.cfg.grid);
  const Box box = c.cfg.diagnostics.box ? *c.cfg.diagnostics.box : grid.box;
  const auto rep = jacobian::completeness_check(m, box, completeness_options(c.cfg.diagnostics, c.workers));
  json verdict = jacobian::to_json(rep);
  verdict["box"] = detail::box_json(box);
  verdict["model"] = detail::model_json(c.cfg.model);
  if (c.cfg.diagnostics.det_field) {
    const auto v = detail::solve(m, grid, m.payoff, c.workers);
    const auto jf = jacobian::jacobian_field(m, v);
    verdict["rank_diagnostics"] =
        jacobian::to_json(jacobian::rank_diagnostics(jf, c.cfg.diagnostics.rank_tol_rel, c.cfg.diagnostics.rank_max_fraction));
    jacobian::write_det_csv(jf, (c.out / "det.csv").string(), {0, grid.n_t / 2, grid.n_t});
  }
  detail::dump(c.out / "verdict.json", verdict);
  summary["verdict"] = jacobian::verdict_name(rep.verdict);
  return rep.verdict == jacobian::Verdict::inconclusive ? kDiagnosticFailure : kOk;
}

/// hedge: replicates the target with (forward asset, model claim) over the
/// configured step levels. Exit 1 on invalid paths or when the fallback
/// fraction exceeds its bound.
inline int cmd_hedge(const Context& c, const std::string& target, json& summary) {
  const auto& cfg = c.cfg;
  const auto m = build_model(cfg.model);
  const auto grid = detail::grid_for(m, cfg.grid);
  const auto v = detail::solve(m, grid, m.payoff, c.workers);

  const double r = model_rate(cfg.model);
  auto strike = [&]() -> double {
    if (cfg.mc.target_strike) return *cfg.mc.target_strike;
    if (auto k = model_strike(cfg.model)) return *k;
    throw ConfigError("/mc/target_strike", "is required for target " + target + " with this model");
  };
  model::Payoff g;
  if (target == "call") g = m.payoff;
  else if (target == "forward") g = hedging::forward_payoff(m);
  else if (target == "digital") g = model::digital_payoff(strike());
  else g = model::put_payoff(strike(), std::exp(-r));
  const auto u = target == "call" ? v : detail::solve(m, grid, g, c.workers);

  hedging::ReplicationPlan plan;
  plan.n_paths = cfg.mc.n_paths;
  plan.seed = cfg.mc.seed;
  plan.antithetic = cfg.mc.antithetic;
  plan.step_levels = cfg.mc.step_levels;
  hedging::HedgeOptions ho;
  ho.tol_rel = cfg.mc.tol_rel;
  ho.fallback_bound = cfg.mc.fallback_bound;
  ho.workers = c.workers;
  const auto rep = hedging::replicate_convergence(m, g, v, u, plan, ho);

  json report = hedging::to_json(rep);
  report["model"] = detail::model_json(cfg.model);
  report["grid"] = pde::grid_json(grid);
  report["seed"] = cfg.mc.seed;
  if (cfg.mc.martingale_paths > 0) {
    hedging::MartingaleOptions mo;
    mo.n_paths = cfg.mc.martingale_paths;
    mo.n_steps = cfg.mc.martingale_steps;
    mo.seed = cfg.mc.seed;
    mo.antithetic = cfg.mc.antithetic;
    mo.workers = c.workers;
    if (cfg.model.kind == "stochvol") {
      const auto p = cfg.model.sv;
      mo.extra_asset = [p](const Vec2& x, double) { return stochvol::discounted_stock(p, 1.0, x); };
      mo.extra_target = p.P0;
      mo.extra_name = "discounted_stock";
    }
    report["martingale"] = hedging::to_json(hedging::martingale_check(m, v, mo));
  }
  detail::dump(c.out / "hedge_report.json", report);
  if (c.format == "json") {
    json conv = json::array();
    for (const auto& row : rep.convergence)
      conv.push_back({{"n_steps", row.n_steps}, {"rmse", row.rmse}, {"fallback_fraction", row.fallback_fraction}});
    detail::dump(c.out / "hedge_convergence.json", conv);
    detail::dump(c.out / "hedge_errors.json", rep.errors);
  } else {
    hedging::write_convergence_csv(rep, (c.out / "hedge_convergence.csv").string());
    hedging::write_errors_csv(rep, (c.out / "hedge_errors.csv").string());
  }
  summary["target"] = target;
  summary["rmse"] = rep.rmse;
  summary["rmse_strictly_decreasing"] = hedging::strictly_decreasing(rep.convergence);
  summary["fallback_fraction"] = rep.fallback_fraction;
  const bool ok = rep.invalid_paths == 0 && rep.fallback_within_bound;
  return ok ? kOk : kDiagnosticFailure;
}

/// flagship: the full stochastic volatility pipeline and its report bundle.
/// Exit 1 when any stage reports a failed check (see the warnings).
inline int cmd_flagship(const Context& c, json& summary) {
  if (c.cfg.model.kind != "stochvol") throw ConfigError("/model/kind", "flagship needs kind stochvol");
  stochvol::FlagshipOptions o;
  o.grid = c.cfg.grid;
  o.mc.n_paths = c.cfg.mc.n_paths;
  o.mc.seed = c.cfg.mc.seed;
  o.mc.antithetic = c.cfg.mc.antithetic;
  o.mc.step_levels = c.cfg.mc.step_levels;
  o.mc.tol_rel = c.cfg.mc.tol_rel;
  o.mc.fallback_bound = c.cfg.mc.fallback_bound;
  o.mc.martingale_paths = c.cfg.mc.martingale_paths;
  o.mc.martingale_steps = c.cfg.mc.martingale_steps;
  o.workers = c.workers;
  o.rank_tol_rel = c.cfg.diagnostics.rank_tol_rel;
  o.rank_max_fraction = c.cfg.diagnostics.rank_max_fraction;
  o.completeness = completeness_options(c.cfg.diagnostics, c.workers);
  const auto rep = stochvol::run_flagship(c.cfg.model.sv, o);
  stochvol::write_bundle(rep, c.out.string());
  summary["verdict"] = jacobian::verdict_name(rep.completeness.verdict);
  summary["call_price"] = rep.call_price;
  summary["warnings"] = rep.warnings;
  const bool ok = rep.validation.passed() && rep.c1.passed() &&
                  rep.completeness.verdict != jacobian::Verdict::inconclusive && rep.parity.passed &&
                  rep.window_passed && rep.digital.invalid_paths == 0 && rep.put.invalid_paths == 0 &&
                  rep.digital.fallback_within_bound && rep.put.fallback_within_bound;
  return ok ? kOk : kDiagnosticFailure;
}

/// Runs one command; returns the exit code and writes a one-line JSON summary
/// to `out` (or an error object to `err`).
inline int run_command(const std::string& command, const Invocation& inv, std::ostream& out, std::ostream& err) {
  json summary{{"command", command}};
  try {
    Context c;
    c.cfg = load_config(inv.config);
    if (inv.seed) c.cfg.mc.seed = *inv.seed;
    if (inv.out) c.cfg.output.dir = *inv.out;
    c.out = c.cfg.output.dir;
    c.workers = inv.workers ? *inv.workers : default_workers();
    c.format = inv.format;
    std::filesystem::create_directories(c.out);
    int code = kOk;
    try {
      if (command == "validate") code = cmd_validate(c, summary);
      else if (command == "price") code = cmd_price(c, summary);
      else if (command == "complete") code = cmd_complete(c, summary);
      else if (command == "hedge") code = cmd_hedge(c, inv.target, summary);
      else if (command == "flagship") code = cmd_flagship(c, summary);
      else throw ConfigError("", "unknown command " + command);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      summary["error"] = e.what();
      code = kDiagnosticFailure;
    }
    summary["exit_code"] = code;
    summary["out"] = c.out.string();
    out << summary.dump() << '\n';
    return code;
  } catch (const ConfigError& e) {
    err << json{{"command", command}, {"exit_code", kConfigError}, {"error", {{"where", e.where()}, {"message", e.what()}}}}
               .dump()
        << '\n';
    return kConfigError;
  }
}

}  // namespace mcomp::cli

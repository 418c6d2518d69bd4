#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcomp/core/random.hpp"
#include "mcomp/jacobian/pairing.hpp"
#include "mcomp/jacobian/test_functions.hpp"
#include "mcomp/model/report.hpp"
#include "mcomp/model/validate.hpp"

namespace mcomp::jacobian {

enum class Verdict { complete_via_rank, complete_via_pairing, inconclusive };

inline std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::complete_via_rank: return "complete_via_rank";
    case Verdict::complete_via_pairing: return "complete_via_pairing";
    default: return "inconclusive";
  }
}

struct CompletenessOptions {
  int n_probes = 4096;
  double tol_rel = 1e-6;
  double max_fraction = 1e-3;
  double abs_floor = 1e-12;
  double error_factor = 10.0;
  PairingOptions pairing{};
  /// Test-function families tried by branch 2, and their mollification width.
  std::vector<TestFunction::Kind> library_kinds{TestFunction::Kind::cone, TestFunction::Kind::bump};
  double library_eps = 0.25;
};

struct RankBranch {
  int probes = 0;
  int skipped_on_kink = 0;
  double near_singular_fraction = 0.0;
  bool passed = false;
};

struct PairingAttempt {
  PairingResult result;
  TestFunction phi;
  bool passed = false;
};

struct CompletenessReport {
  Verdict verdict = Verdict::inconclusive;
  RankBranch rank;
  bool pairing_branch_run = false;
  int pairings_tried = 0;
  std::optional<PairingAttempt> winner;
  std::optional<PairingAttempt> largest;
  CheckRow growth;
  std::string reason;
};

/// Boxes searched by the pairing branch: the whole box, then its four quadrants.
inline std::vector<Box> pairing_boxes(const Box& box) {
  std::vector<Box> out{box};
  const double c0 = box.center(0), c1 = box.center(1);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      out.push_back(Box{{a ? c0 : box.lo[0], b ? c1 : box.lo[1]}, {a ? box.hi[0] : c0, b ? box.hi[1] : c1}});
  return out;
}

/// Fraction of quasi-random probes x in box at t = 1 with
/// |det J[f, g]| < tol_rel |grad f| |grad g|. Probes on g's kink locus are skipped.
inline RankBranch rank_branch(const model::DiffusionModel& m, const Box& box, const CompletenessOptions& opt) {
  m.forward.require(1, false, false);
  RankBranch rb;
  long singular = 0;
  for (int p = 1; p <= opt.n_probes; ++p) {
    const auto u = Halton::point(static_cast<std::uint64_t>(p));
    const Vec2 x = box.at(u[0], u[1]);
    if (m.payoff.kink && m.payoff.kink->contains(x)) {
      ++rb.skipped_on_kink;
      continue;
    }
    const Jet f = m.forward.jet(1.0, x);
    const Vec2 gf{f.x[0], f.x[1]};
    const Vec2 gg = m.payoff.gradient(x);
    const double w = gf[0] * gg[1] - gf[1] * gg[0];
    const double s = norm(gf) * norm(gg);
    if (s == 0.0 || !(std::abs(w) >= opt.tol_rel * s)) ++singular;
    ++rb.probes;
  }
  rb.near_singular_fraction = rb.probes ? static_cast<double>(singular) / rb.probes : 1.0;
  rb.passed = rb.near_singular_fraction <= opt.max_fraction;
  return rb;
}

/// Decision procedure for the terminal-rank / pairing alternative.
///
/// Branch 1 passes when the near-singular fraction of J[f, g](1, .) is at most
/// max_fraction. Otherwise branch 2 pairs g with the test-function library on
/// the whole box and its quadrants and passes on the first |B_K| above both
/// abs_floor and error_factor times its quadrature error estimate. A failed
/// growth check on dg/dx_j makes the verdict inconclusive.
inline CompletenessReport completeness_check(const model::DiffusionModel& m, const Box& box,
                                             const CompletenessOptions& opt = {}) {
  box.check();
  CompletenessReport rep;
  const auto validation = model::validate_assumptions(m, box, opt.n_probes);
  rep.growth = *validation.find("A4.growth");
  rep.rank = rank_branch(m, box, opt);
  if (rep.rank.passed) {
    rep.verdict = Verdict::complete_via_rank;
  } else {
    rep.pairing_branch_run = true;
    for (const Box& K : pairing_boxes(box)) {
      const PairingIntegrator integ(m, m.payoff, K, opt.pairing);
      for (const auto& phi : test_function_library(K, opt.library_eps)) {
        if (std::find(opt.library_kinds.begin(), opt.library_kinds.end(), phi.kind) == opt.library_kinds.end()) continue;
        PairingAttempt at;
        at.result = integ.integrate(phi);
        at.phi = phi;
        const double mag = std::abs(at.result.value);
        at.passed = mag > opt.abs_floor && mag > opt.error_factor * at.result.error_estimate;
        ++rep.pairings_tried;
        if (!rep.largest || mag > std::abs(rep.largest->result.value)) rep.largest = at;
        if (at.passed) {
          rep.winner = at;
          break;
        }
      }
      if (rep.winner) break;
    }
    rep.verdict = rep.winner ? Verdict::complete_via_pairing : Verdict::inconclusive;
  }
  if (!rep.growth.passed) {
    rep.verdict = Verdict::inconclusive;
    rep.reason = "growth bound on dg/dx_j fails";
  } else if (rep.verdict == Verdict::inconclusive) {
    rep.reason = "J[f,g](1,.) is near-singular and no test function gave a certified nonzero pairing";
  } else if (rep.verdict == Verdict::complete_via_rank) {
    rep.reason = "J[f,g](1,.) has full rank at the probes";
  } else {
    rep.reason = "nonzero pairing certified by " + rep.winner->result.test_function_id;
  }
  return rep;
}

inline nlohmann::json to_json(const PairingAttempt& a) {
  nlohmann::json j = to_json(a.result);
  j["passed"] = a.passed;
  j["test_function_parameters"] = {{"kind", kind_name(a.phi.kind)},
                                   {"center", {a.phi.center[0], a.phi.center[1]}},
                                   {"half_width", {a.phi.half[0], a.phi.half[1]}},
                                   {"eps", a.phi.eps}};
  return j;
}

inline nlohmann::json to_json(const CompletenessReport& r) {
  nlohmann::json j{{"verdict", verdict_name(r.verdict)},
                   {"reason", r.reason},
                   {"rank_branch",
                    {{"probes", r.rank.probes},
                     {"skipped_on_kink", r.rank.skipped_on_kink},
                     {"near_singular_fraction", r.rank.near_singular_fraction},
                     {"passed", r.rank.passed}}},
                   {"pairing_branch_run", r.pairing_branch_run},
                   {"pairings_tried", r.pairings_tried},
                   {"growth", mcomp::to_json(r.growth)}};
  if (r.winner) j["winner"] = to_json(*r.winner);
  if (r.largest) j["largest_pairing"] = to_json(*r.largest);
  return j;
}

}  // namespace mcomp::jacobian

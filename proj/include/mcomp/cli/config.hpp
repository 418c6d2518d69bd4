#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcomp/core/box.hpp"
#include "mcomp/core/errors.hpp"
#include "mcomp/core/smooth1d.hpp"
#include "mcomp/jacobian/completeness.hpp"
#include "mcomp/model/diffusion_model.hpp"
#include "mcomp/model/payoff.hpp"
#include "mcomp/stochvol/flagship.hpp"
#include "mcomp/stochvol/model.hpp"

namespace mcomp::cli {

using nlohmann::json;

/// Strict view of a JSON object: every key must be consumed before finish().
class Obj {
 public:
  Obj(const json& j, std::string ptr) : j_(&j), ptr_(std::move(ptr)) {
    if (!j.is_object()) throw ConfigError(where(), "must be an object");
  }

  const std::string& ptr() const { return ptr_; }
  bool has(const std::string& key) const { return j_->contains(key); }

  std::string at(const std::string& key) const { return ptr_ + "/" + key; }

  /// Finite number in [lo, hi]; `open_lo` excludes lo itself.
  double number(const std::string& key, double def, double lo = -std::numeric_limits<double>::infinity(),
                double hi = std::numeric_limits<double>::infinity(), bool open_lo = false) {
    if (!take(key)) return def;
    const json& v = (*j_)[key];
    if (!v.is_number()) throw ConfigError(at(key), "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(at(key), "must be finite");
    if (open_lo ? !(d > lo) : !(d >= lo)) throw ConfigError(at(key), bound_text(open_lo ? ">" : ">=", lo));
    if (!(d <= hi)) throw ConfigError(at(key), bound_text("<=", hi));
    return d;
  }

  double positive(const std::string& key, double def, double hi = std::numeric_limits<double>::infinity()) {
    return number(key, def, 0.0, hi, true);
  }

  long long integer(const std::string& key, long long def, long long lo, long long hi) {
    if (!take(key)) return def;
    const json& v = (*j_)[key];
    if (!v.is_number_integer()) throw ConfigError(at(key), "must be an integer");
    const long long i = v.get<long long>();
    if (i < lo || i > hi) {
      std::ostringstream os;
      os << "must be in [" << lo << ", " << hi << "]";
      throw ConfigError(at(key), os.str());
    }
    return i;
  }

  bool boolean(const std::string& key, bool def) {
    if (!take(key)) return def;
    const json& v = (*j_)[key];
    if (!v.is_boolean()) throw ConfigError(at(key), "must be true or false");
    return v.get<bool>();
  }

  std::string choice(const std::string& key, const std::string& def, const std::vector<std::string>& allowed) {
    std::string s = def;
    if (take(key)) {
      const json& v = (*j_)[key];
      if (!v.is_string()) throw ConfigError(at(key), "must be a string");
      s = v.get<std::string>();
    } else if (def.empty()) {
      throw ConfigError(at(key), "is required");
    }
    for (const auto& a : allowed)
      if (a == s) return s;
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError(at(key), "must be one of: " + list);
  }

  std::string string(const std::string& key, const std::string& def) {
    if (!take(key)) return def;
    const json& v = (*j_)[key];
    if (!v.is_string() || v.get<std::string>().empty()) throw ConfigError(at(key), "must be a nonempty string");
    return v.get<std::string>();
  }

  std::optional<Obj> object(const std::string& key) {
    if (!take(key)) return std::nullopt;
    return Obj((*j_)[key], at(key));
  }

  const json* array(const std::string& key) {
    if (!take(key)) return nullptr;
    const json& v = (*j_)[key];
    if (!v.is_array()) throw ConfigError(at(key), "must be an array");
    return &v;
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> def, double lo, double hi,
                              std::size_t min_size = 1) {
    const json* a = array(key);
    if (!a) return def;
    if (a->size() < min_size) throw ConfigError(at(key), "needs at least " + std::to_string(min_size) + " entries");
    std::vector<double> out;
    for (std::size_t i = 0; i < a->size(); ++i) {
      const json& v = (*a)[i];
      const std::string p = at(key) + "/" + std::to_string(i);
      if (!v.is_number()) throw ConfigError(p, "must be a number");
      const double d = v.get<double>();
      if (!std::isfinite(d) || d < lo || d > hi) throw ConfigError(p, "must be in [" + fmt(lo) + ", " + fmt(hi) + "]");
      out.push_back(d);
    }
    return out;
  }

  std::vector<int> integers(const std::string& key, std::vector<int> def, int lo, int hi) {
    const json* a = array(key);
    if (!a) return def;
    if (a->empty()) throw ConfigError(at(key), "must not be empty");
    std::vector<int> out;
    for (std::size_t i = 0; i < a->size(); ++i) {
      const json& v = (*a)[i];
      const std::string p = at(key) + "/" + std::to_string(i);
      if (!v.is_number_integer()) throw ConfigError(p, "must be an integer");
      const long long n = v.get<long long>();
      if (n < lo || n > hi) throw ConfigError(p, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      out.push_back(static_cast<int>(n));
    }
    return out;
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(at(it.key()), "unknown key");
  }

 private:
  bool take(const std::string& key) {
    seen_.insert(key);
    return j_->contains(key);
  }

  std::string where() const { return ptr_.empty() ? "/" : ptr_; }

  static std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }

  static std::string bound_text(const char* op, double v) { return std::string("must be ") + op + " " + fmt(v); }

  const json* j_;
  std::string ptr_;
  std::set<std::string> seen_;
};

struct PayoffSpec {
  std::string kind = "call";  // call, put, digital, constant
  double strike = 1.0;
  double value = 1.0;
  bool discounted = true;
};

struct ModelSpec {
  std::string kind = "stochvol";  // stochvol, lognormal, independent_coordinates
  stochvol::StochVolParams sv;
  double nu = 0.2;
  double vol2 = 0.2;
  double r = 0.0;
  double strike = 1.0;
  Vec2 x0{0.0, 0.0};
  std::optional<PayoffSpec> payoff;
  std::optional<double> n_inv;
  std::optional<double> n_growth;
};

struct MCSpec {
  int n_paths = 10000;
  std::uint64_t seed = 1;
  bool antithetic = false;
  std::vector<int> step_levels{64, 128, 256, 512};
  double tol_rel = 1e-6;
  double fallback_bound = 1e-3;
  std::optional<double> target_strike;
  int martingale_paths = 0;
  int martingale_steps = 256;
};

struct TimeProbeSpec {
  std::vector<double> t{0.25, 0.5, 0.75};
  std::vector<Vec2> x{{0.0, 0.0}, {0.5, 1.0}};
  int order = 6;
};

struct DiagnosticsSpec {
  std::optional<Box> box;
  int n_probes = 4096;
  double rank_tol_rel = 1e-6;
  double rank_max_fraction = 1e-3;
  double abs_floor = 1e-12;
  double error_factor = 10.0;
  std::vector<std::string> test_functions{"cone", "bump"};
  double test_function_eps = 0.25;
  bool det_field = false;
  TimeProbeSpec time_probe;
};

struct OutputSpec {
  std::string dir = "out";
  std::vector<int> price_levels{0};
};

struct RunConfig {
  ModelSpec model;
  stochvol::GridSpec grid;
  MCSpec mc;
  DiagnosticsSpec diagnostics;
  OutputSpec output;
};

namespace detail {

inline Smooth1D read_smooth(Obj o) {
  const std::string kind = o.choice("kind", "", {"constant", "linear", "arctan", "tanh", "exp"});
  const double base = o.number("base", 0.0);
  const double amp = o.number("amplitude", 0.0);
  const double center = o.number("center", 0.0);
  const double width = o.positive("width", 1.0);
  o.finish();
  if (kind == "constant") return Smooth1D::constant(base);
  if (kind == "linear") return Smooth1D::linear(base, amp);
  if (kind == "arctan") return Smooth1D::arctan(base, amp, center, width);
  if (kind == "tanh") return Smooth1D::tanh(base, amp, center, width);
  return Smooth1D::exponential(amp, width);
}

inline Smooth1D smooth_or(Obj& parent, const std::string& key, const Smooth1D& def) {
  auto o = parent.object(key);
  return o ? read_smooth(*o) : def;
}

inline PayoffSpec read_payoff(Obj o) {
  PayoffSpec p;
  p.kind = o.choice("kind", "", {"call", "put", "digital", "constant"});
  if (p.kind == "constant") {
    p.value = o.number("value", 1.0);
  } else {
    p.strike = o.positive("strike", 1.0);
    p.discounted = o.boolean("discounted", true);
  }
  o.finish();
  return p;
}

inline Vec2 read_vec2(Obj& o, const std::string& key, Vec2 def) {
  const auto v = o.numbers(key, {def[0], def[1]}, -1e6, 1e6, 2);
  if (v.size() != 2) throw ConfigError(o.at(key), "must have exactly 2 entries");
  return {v[0], v[1]};
}

inline ModelSpec read_model(Obj o) {
  ModelSpec m;
  m.kind = o.choice("kind", "", {"stochvol", "lognormal", "independent_coordinates"});
  if (m.kind == "stochvol") {
    auto& p = m.sv;
    p.alpha = o.number("alpha", p.alpha, -50.0, 50.0);
    p.m = o.number("m", p.m, -1e3, 1e3);
    p.r = o.number("r", p.r, 0.0, 1.0);
    p.Gamma = o.positive("Gamma", p.Gamma, 1e6);
    p.P0 = o.positive("P0", p.P0, 1e6);
    p.Y0 = o.number("Y0", p.Y0, -1e3, 1e3);
    p.floor = o.positive("floor", p.floor);
    p.nu = smooth_or(o, "nu", p.nu);
    p.sigma1 = smooth_or(o, "sigma1", p.sigma1);
    p.sigma2 = smooth_or(o, "sigma2", p.sigma2);
    if (auto mu = o.object("mu")) {
      p.mu.scale = mu->number("scale", 0.0);
      p.mu.p_factor = smooth_or(*mu, "p_factor", Smooth1D::constant(1.0));
      p.mu.y_factor = smooth_or(*mu, "y_factor", Smooth1D::constant(1.0));
      mu->finish();
    }
    if (auto c1 = o.object("c1")) {
      p.c1.D = c1->positive("D", p.c1.D);
      p.c1.rho = c1->positive("rho", p.c1.rho);
      p.c1.epsilon = c1->positive("epsilon", p.c1.epsilon);
      c1->finish();
    }
  } else if (m.kind == "lognormal") {
    m.nu = o.positive("nu", m.nu, 10.0);
    m.vol2 = o.positive("vol2", m.vol2, 10.0);
    m.r = o.number("r", m.r, 0.0, 1.0);
    m.strike = o.positive("strike", m.strike, 1e6);
    m.x0 = read_vec2(o, "x0", m.x0);
  }
  if (auto p = o.object("payoff")) m.payoff = read_payoff(*p);
  if (auto e = o.object("envelope")) {
    if (e->has("n_inv")) m.n_inv = e->positive("n_inv", 1.0);
    if (e->has("n_growth")) m.n_growth = e->positive("n_growth", 1.0);
    e->finish();
  }
  o.finish();
  return m;
}

inline Box read_box(Obj o) {
  Box b;
  for (int j = 0; j < 2; ++j) {
    const std::string key = "x" + std::to_string(j + 1);
    const auto v = o.numbers(key, {}, -1e3, 1e3, 2);
    if (v.size() != 2) throw ConfigError(o.at(key), "must be [lo, hi]");
    if (!(v[0] < v[1])) throw ConfigError(o.at(key), "needs lo < hi");
    b.lo[j] = v[0];
    b.hi[j] = v[1];
  }
  o.finish();
  return b;
}

}  // namespace detail

/// Parses and validates a run configuration. Errors carry a JSON pointer.
inline RunConfig parse_config(const json& root) {
  RunConfig c;
  Obj top(root, "");
  {
    auto m = top.object("model");
    if (!m) throw ConfigError("/model", "is required");
    c.model = detail::read_model(*m);
  }
  if (auto g = top.object("grid")) {
    c.grid.n1 = static_cast<int>(g->integer("n1", c.grid.n1, 5, 4001));
    c.grid.n2 = static_cast<int>(g->integer("n2", c.grid.n2, 5, 4001));
    c.grid.n_t = static_cast<int>(g->integer("n_t", c.grid.n_t, 4, 100000));
    c.grid.k = g->number("k", c.grid.k, 1.0, 20.0);
    g->finish();
  }
  if (auto mc = top.object("mc")) {
    c.mc.n_paths = static_cast<int>(mc->integer("n_paths", c.mc.n_paths, 2, 100000000));
    c.mc.seed = static_cast<std::uint64_t>(mc->integer("seed", 1, 0, std::numeric_limits<long long>::max()));
    c.mc.antithetic = mc->boolean("antithetic", c.mc.antithetic);
    c.mc.step_levels = mc->integers("step_levels", c.mc.step_levels, 1, 1 << 20);
    c.mc.tol_rel = mc->positive("tol_rel", c.mc.tol_rel, 1.0);
    c.mc.fallback_bound = mc->number("fallback_bound", c.mc.fallback_bound, 0.0, 1.0);
    if (mc->has("target_strike")) c.mc.target_strike = mc->positive("target_strike", 1.0, 1e6);
    c.mc.martingale_paths = static_cast<int>(mc->integer("martingale_paths", c.mc.martingale_paths, 0, 100000000));
    c.mc.martingale_steps = static_cast<int>(mc->integer("martingale_steps", c.mc.martingale_steps, 1, 1 << 20));
    mc->finish();
    const int finest = *std::max_element(c.mc.step_levels.begin(), c.mc.step_levels.end());
    for (std::size_t i = 0; i < c.mc.step_levels.size(); ++i)
      if (finest % c.mc.step_levels[i] != 0)
        throw ConfigError("/mc/step_levels/" + std::to_string(i), "must divide the finest level");
    if (c.mc.antithetic && (c.mc.n_paths % 2 != 0)) throw ConfigError("/mc/n_paths", "must be even with antithetic");
    if (c.mc.antithetic && c.mc.martingale_paths % 2 != 0)
      throw ConfigError("/mc/martingale_paths", "must be even with antithetic");
  }
  if (auto d = top.object("diagnostics")) {
    auto& D = c.diagnostics;
    if (auto b = d->object("box")) D.box = detail::read_box(*b);
    D.n_probes = static_cast<int>(d->integer("n_probes", D.n_probes, 1, 10000000));
    D.rank_tol_rel = d->positive("rank_tol_rel", D.rank_tol_rel, 1.0);
    D.rank_max_fraction = d->number("rank_max_fraction", D.rank_max_fraction, 0.0, 1.0);
    D.abs_floor = d->number("abs_floor", D.abs_floor, 0.0);
    D.error_factor = d->number("error_factor", D.error_factor, 1.0);
    D.test_function_eps = d->number("test_function_eps", D.test_function_eps, 0.0, 1.0, true);
    if (const json* tf = d->array("test_functions")) {
      if (tf->empty()) throw ConfigError(d->at("test_functions"), "must not be empty");
      D.test_functions.clear();
      for (std::size_t i = 0; i < tf->size(); ++i) {
        const json& v = (*tf)[i];
        const std::string p = d->at("test_functions") + "/" + std::to_string(i);
        if (!v.is_string() || (v != "cone" && v != "bump")) throw ConfigError(p, "must be one of: cone, bump");
        D.test_functions.push_back(v.get<std::string>());
      }
    }
    D.det_field = d->boolean("det_field", D.det_field);
    if (auto tp = d->object("time_probe")) {
      D.time_probe.t = tp->numbers("t", D.time_probe.t, -10.0, 10.0);
      D.time_probe.order = static_cast<int>(tp->integer("order", D.time_probe.order, 1, 6));
      if (const json* xs = tp->array("x")) {
        D.time_probe.x.clear();
        for (std::size_t i = 0; i < xs->size(); ++i) {
          const json& v = (*xs)[i];
          const std::string p = tp->at("x") + "/" + std::to_string(i);
          if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw ConfigError(p, "must be [x1, x2]");
          D.time_probe.x.push_back({v[0].get<double>(), v[1].get<double>()});
        }
        if (D.time_probe.x.empty()) throw ConfigError(tp->at("x"), "must not be empty");
      }
      tp->finish();
    }
    d->finish();
  }
  if (auto o = top.object("output")) {
    c.output.dir = o->string("dir", c.output.dir);
    c.output.price_levels = o->integers("price_levels", c.output.price_levels, -1, 100000);
    o->finish();
  }
  top.finish();
  for (std::size_t i = 0; i < c.output.price_levels.size(); ++i)
    if (c.output.price_levels[i] > c.grid.n_t)
      throw ConfigError("/output/price_levels/" + std::to_string(i), "exceeds grid n_t");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("parse error at byte ") + std::to_string(e.byte) + ": " + e.what());
  }
  return parse_config(j);
}

inline model::Payoff build_payoff(const PayoffSpec& p, double r) {
  const double c = p.discounted ? std::exp(-r) : 1.0;
  if (p.kind == "constant") return model::constant_payoff(p.value);
  if (p.kind == "put") return model::put_payoff(p.strike, c);
  if (p.kind == "digital") return model::digital_payoff(p.strike, c);
  return model::call_payoff(p.strike, c);
}

/// Builds the model. With `require_floors = false` a stochastic volatility
/// market whose volatilities lack a positive floor is still built, so that
/// validation can report the failing assumption.
inline model::DiffusionModel build_model(const ModelSpec& s, bool require_floors = true) {
  model::DiffusionModel m;
  double r = 0.0;
  if (s.kind == "stochvol") {
    m = stochvol::build_stochvol_model(s.sv, require_floors);
    r = s.sv.r;
  } else if (s.kind == "lognormal") {
    m = model::lognormal_model(s.nu, s.r, s.strike, s.vol2, s.x0);
    r = s.r;
  } else {
    m = model::independent_coordinates_model();
  }
  if (s.payoff) {
    const bool same_call = s.payoff->kind == "call" && s.payoff->discounted && m.call_reduction &&
                           s.payoff->strike == m.call_reduction->strike;
    m.payoff = build_payoff(*s.payoff, r);
    if (!same_call) m.call_reduction.reset();
  }
  if (s.n_inv) m.envelope.n_inv = *s.n_inv;
  if (s.n_growth) m.envelope.n_growth = *s.n_growth;
  return m;
}

/// The model's rate as a constant, for discounted target payoffs.
inline double model_rate(const ModelSpec& s) {
  if (s.kind == "stochvol") return s.sv.r;
  if (s.kind == "lognormal") return s.r;
  return 0.0;
}

/// Default strike for digital / put targets.
inline std::optional<double> model_strike(const ModelSpec& s) {
  if (s.kind == "stochvol") return s.sv.Gamma;
  if (s.kind == "lognormal") return s.strike;
  return std::nullopt;
}

inline jacobian::CompletenessOptions completeness_options(const DiagnosticsSpec& d, int workers) {
  jacobian::CompletenessOptions o;
  o.n_probes = d.n_probes;
  o.tol_rel = d.rank_tol_rel;
  o.max_fraction = d.rank_max_fraction;
  o.abs_floor = d.abs_floor;
  o.error_factor = d.error_factor;
  o.pairing.workers = workers;
  o.library_eps = d.test_function_eps;
  o.library_kinds.clear();
  for (const auto& k : d.test_functions)
    o.library_kinds.push_back(k == "cone" ? jacobian::TestFunction::Kind::cone : jacobian::TestFunction::Kind::bump);
  return o;
}

}  // namespace mcomp::cli

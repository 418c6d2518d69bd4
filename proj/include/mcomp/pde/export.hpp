#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcomp/pde/residual.hpp"
#include "mcomp/pde/value_field.hpp"

namespace mcomp::pde {

/// Fixed-format number used by all CSV writers so output is byte-stable.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Rows (t, x1, x2, v) for every level, or only `level` when it is >= 0.
inline void write_value_csv(const ValueField& v, const std::string& path, int level = -1) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t,x1,x2,v\n";
  const auto& g = v.grid();
  for (int k = 0; k < v.levels(); ++k) {
    if (level >= 0 && k != level) continue;
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j)
        out << fmt(v.time(k)) << ',' << fmt(g.x(0, i)) << ',' << fmt(g.x(1, j)) << ',' << fmt(v.at(k, i, j)) << '\n';
  }
}

/// Rows (t, x1, x2, v) for the listed levels; -1 in the list selects all.
inline void write_value_csv(const ValueField& v, const std::string& path, const std::vector<int>& levels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t,x1,x2,v\n";
  const auto& g = v.grid();
  const bool all = std::find(levels.begin(), levels.end(), -1) != levels.end();
  for (int k = 0; k < v.levels(); ++k) {
    if (!all && std::find(levels.begin(), levels.end(), k) == levels.end()) continue;
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j)
        out << fmt(v.time(k)) << ',' << fmt(g.x(0, i)) << ',' << fmt(g.x(1, j)) << ',' << fmt(v.at(k, i, j)) << '\n';
  }
}

/// The same selection as JSON: node coordinates once, then one matrix per level.
inline nlohmann::json value_json(const ValueField& v, const std::vector<int>& levels) {
  const auto& g = v.grid();
  const bool all = std::find(levels.begin(), levels.end(), -1) != levels.end();
  nlohmann::json x1 = nlohmann::json::array(), x2 = nlohmann::json::array(), out = nlohmann::json::array();
  for (int i = 0; i < g.n1; ++i) x1.push_back(g.x(0, i));
  for (int j = 0; j < g.n2; ++j) x2.push_back(g.x(1, j));
  for (int k = 0; k < v.levels(); ++k) {
    if (!all && std::find(levels.begin(), levels.end(), k) == levels.end()) continue;
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < g.n1; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int j = 0; j < g.n2; ++j) row.push_back(v.at(k, i, j));
      rows.push_back(std::move(row));
    }
    out.push_back({{"level", k}, {"t", v.time(k)}, {"v", std::move(rows)}});
  }
  return {{"x1", x1}, {"x2", x2}, {"levels", out}};
}

inline nlohmann::json grid_json(const SpaceTimeGrid& g) {
  return {{"box", {{"x1", {g.box.lo[0], g.box.hi[0]}}, {"x2", {g.box.lo[1], g.box.hi[1]}}}},
          {"n1", g.n1},
          {"n2", g.n2},
          {"n_t", g.n_t},
          {"theta", g.theta},
          {"rannacher_steps", g.rannacher_steps}};
}

inline nlohmann::json residual_json(const ResidualReport& r) {
  return {{"l2", r.l2}, {"max", r.max}, {"nodes", r.nodes}};
}

}  // namespace mcomp::pde

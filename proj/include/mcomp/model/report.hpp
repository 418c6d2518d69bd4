#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcomp/core/linalg.hpp"

namespace mcomp {

/// Location of the worst probe for a check.
struct Witness {
  double t = 0.0;
  Vec2 x{};
};

/// One pass/fail line of a diagnostic report.
struct CheckRow {
  std::string id;
  std::string description;
  bool passed = true;
  double value = 0.0;
  double bound = 0.0;
  std::optional<Witness> witness;
  bool heuristic = false;
  std::string note;
};

inline CheckRow make_row(std::string id, std::string description, double value, double bound) {
  CheckRow r;
  r.id = std::move(id);
  r.description = std::move(description);
  r.value = value;
  r.bound = bound;
  return r;
}

struct ValidationReport {
  std::vector<CheckRow> rows;
  int n_probes = 0;

  /// True when every non-heuristic row passed.
  bool passed() const {
    for (const auto& r : rows)
      if (!r.heuristic && !r.passed) return false;
    return true;
  }

  const CheckRow* find(const std::string& id) const {
    for (const auto& r : rows)
      if (r.id == id) return &r;
    return nullptr;
  }

  void append(const ValidationReport& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }
};

inline nlohmann::json to_json(const CheckRow& r) {
  nlohmann::json j{{"id", r.id}, {"description", r.description}, {"passed", r.passed},
                   {"value", r.value}, {"bound", r.bound}, {"heuristic", r.heuristic}};
  if (r.witness) j["witness"] = {{"t", r.witness->t}, {"x1", r.witness->x[0]}, {"x2", r.witness->x[1]}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

inline nlohmann::json to_json(const ValidationReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) rows.push_back(to_json(r));
  return {{"passed", rep.passed()}, {"n_probes", rep.n_probes}, {"rows", rows}};
}

}  // namespace mcomp

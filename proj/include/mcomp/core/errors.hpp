#pragma once

#include <stdexcept>
#include <string>

namespace mcomp {

/// NaN/Inf produced while evaluating a model coefficient.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A derivative (or other facility) was requested that the field does not provide.
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid grid layout (too few nodes, bad spacing, ...).
class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Linear solve failure inside a time step.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, int step) : std::runtime_error(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// Invalid construction parameters.
class ConstructionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration parse/validation failure; `where` is a JSON pointer to the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string where, const std::string& msg)
      : std::runtime_error(where.empty() ? msg : where + ": " + msg), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// Error raised by an orchestration stage, tagged with the stage name.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& msg)
      : std::runtime_error("[" + stage + "] " + msg), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace mcomp

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace krf {

/// Root of the library's exception hierarchy. Every error thrown by krf
/// derives from this type so callers can map failures to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (grid sizes, option ranges, unknown keys).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Syntax error in a config file or expression, with 1-based position.
class ParseError : public ConfigurationError {
 public:
  ParseError(const std::string& what, int line, int column)
      : ConfigurationError(what + " (line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ")"),
        line_(line),
        column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

/// Bad argument to an operation (negative time, zero epsilon, grid mismatch).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Model data violating a structural requirement (indefinite metric, f_mu <= 0).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// A barrier construction whose mathematical hypothesis fails on the grid.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// A matrix that should be positive definite is not, at a specific node.
class AdmissibilityError : public Error {
 public:
  AdmissibilityError(const std::string& what, std::size_t node)
      : Error(what + " (node " + std::to_string(node) + ")"), node_(node) {}
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

/// Iterative solver failure. Carries the residual history for diagnostics.
class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what, std::vector<double> history = {})
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// Time-step underflow in the flow integrator.
class StabilityError : public Error {
 public:
  StabilityError(const std::string& what, std::size_t node, double t)
      : Error(what + " (node " + std::to_string(node) + ", t=" + std::to_string(t) + ")"),
        node_(node),
        t_(t) {}
  std::size_t node() const noexcept { return node_; }
  double time() const noexcept { return t_; }

 private:
  std::size_t node_;
  double t_;
};

/// A condition that the construction guarantees was observed to fail.
class InternalError : public Error {
 public:
  using Error::Error;
};

/// A prerequisite artifact on disk is missing or unreadable.
class DependencyError : public Error {
 public:
  using Error::Error;
};

/// Low-level I/O failure (bad magic, truncated file).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace krf

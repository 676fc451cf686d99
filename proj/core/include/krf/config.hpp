// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "krf/flow.hpp"
#include "krf/geometry.hpp"
#include "krf/static_solver.hpp"

namespace krf {

struct FlowSection {
  Expression phi0 = Expression::constant(0.0);
  double t_end = 5.0;
  double dt0 = 1e-2;
  double dt_max = 0.1;
  int snapshot_every = 1;
  TimeScheme scheme = TimeScheme::kLinearlyImplicit;
  StencilScheme stencil = StencilScheme::kCentral;
  int stencil_radius = 1;
};

struct SolverSection {
  StaticMethod method = StaticMethod::kDampedNewton;
  double tol = 1e-10;
  int max_iter = 100;
  double semiflat_tol = 1e-12;
};

struct BarrierSection {
  std::vector<double> epsilons{0.2, 0.1, 0.05};
  /// Profile |s|_h in (0, 1] of the base coordinates; approximate barriers are
  /// skipped without it.
  std::optional<Expression> divisor;
};

struct VerifySection {
  std::vector<std::string> checks{"sandwich", "classify", "rate", "bounds", "semiflat"};
  /// Sandwich tolerance; 0 selects the grid-calibrated value.
  double sandwich_tol = 0.0;
  double rate_window_start = 4.0;
  double rate_window_end = 10.0;
  int comparison_pairs = 50;
  std::uint64_t seed = 1;
};

struct OutputSection {
  std::string dir = "runs";
  std::vector<std::string> formats{"csv", "bin", "json"};
};

/// Validated experiment configuration.
struct RunConfig {
  ModelSpec model;
  FlowSection flow;
  SolverSection solver;
  BarrierSection barrier;
  VerifySection verify;
  OutputSection output;

  /// Sorted "section.key = value" lines after defaults and overrides; the
  /// input of config_hash.
  std::string canonical;

  bool wants(const std::string& check) const;
};

/// Looks up environment overrides; returns nullopt when a variable is unset.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment.
EnvLookup process_environment();

/// Parses INI-style text:
///
///   # comment
///   [model]
///   dims = 2
///   points = 64 64
///   A0.11 = 1 + 0.1*cos(y1)
///
/// Each key may be overridden by the variable KRF_<SECTION>_<KEY> with the key
/// upper-cased and '.' replaced by '_' (KRF_MODEL_A0_11). Syntax errors throw
/// ParseError with line and column; unknown sections or keys throw
/// ConfigurationError naming the key; out-of-range values throw
/// ConfigurationError.
RunConfig parse_config_text(const std::string& text, const EnvLookup& env = {});

/// Reads `path`; a missing or unreadable file throws DependencyError.
RunConfig parse_config(const std::string& path, const EnvLookup& env = {});

/// 64-bit FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const RunConfig& config);

}  // namespace krf

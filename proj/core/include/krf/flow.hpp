// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/SparseLU>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "krf/geometry.hpp"
#include "krf/ma_operator.hpp"

namespace krf {

/// kLinearlyImplicit linearizes log det around the current field and solves
/// ((1/dt + slope) I - J) d = G(t + dt, phi) - F(t + dt, phi), which stays
/// stable when the fiber directions stiffen like e^t. kExplicit is the
/// update phi' = (phi + dt (G(t, phi) - offset)) / (1 + slope dt), explicit in
/// the Monge-Ampere term and implicit in the reaction.
enum class TimeScheme { kLinearlyImplicit, kExplicit };

struct FlowState {
  double t = 0.0;
  ScalarField phi;
  ScalarField last_phi_dot;
  long step_index = 0;
};

struct StepOptions {
  TimeScheme scheme = TimeScheme::kLinearlyImplicit;
  HessianStencil stencil = HessianStencil::central();
  double dt_min = 1e-8;
};

struct StepResult {
  FlowState state;
  double dt = 0.0;  // accepted step
  int halvings = 0;
};

/// G(t, phi) = log det(theta_t + D^2 phi) - log(C(n,kappa) e^{-(n-kappa)t} f_mu).
/// Throws AdmissibilityError at an indefinite node.
std::vector<double> flow_drive(const FlowProblem& problem, double t, const ScalarField& phi,
                               const HessianStencil& stencil = HessianStencil::central());

/// Builds the t = 0 state; throws AdmissibilityError if A0 + D^2 phi0 is not
/// positive definite under the stencil.
FlowState initial_state(const FlowProblem& problem, const ScalarField& phi0,
                        const HessianStencil& stencil = HessianStencil::central());

/// Reusable stepper; keeps the sparse factorization pattern between steps.
class FlowStepper {
 public:
  FlowStepper(const FlowProblem& problem, StepOptions options = {});

  /// Advances by dt, halving on loss of definiteness. Throws ArgumentError for
  /// dt <= 0 and StabilityError once dt falls below dt_min.
  StepResult step(const FlowState& state, double dt);

  const StepOptions& options() const noexcept { return options_; }

 private:
  bool try_step(const FlowState& state, double dt, FlowState& out, std::size_t& bad_node);

  const FlowProblem* problem_;
  StepOptions options_;
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
  bool analyzed_ = false;
};

/// One step with a fresh stepper.
FlowState step(const FlowProblem& problem, const FlowState& state, double dt, const StepOptions& options = {});

/// Largest dt for which the explicit update is monotone at (t, phi): the
/// coefficient of phi(x) in the update stays >= 0. Only meaningful for the
/// wide stencil, where every neighbor coefficient is nonnegative.
double explicit_monotone_dt(const FlowProblem& problem, double t, const ScalarField& phi,
                            const HessianStencil& stencil);

struct DiagnosticRow {
  double t = 0.0;
  double sup_phi = 0.0;
  double inf_phi = 0.0;
  double i_t = 0.0;
  double excess = 0.0;       // (I' + I) - bound, filled by integral_diagnostic
  double dist_static = 0.0;  // sup |phi - phi_inf|, NaN without phi_inf
  double max_residual = 0.0;
  double dt = 0.0;
  double i_rate = 0.0;       // sum last_phi_dot f_mu * cell volume
};

struct Trajectory {
  std::vector<DiagnosticRow> rows;   // one per accepted step, plus t = 0
  std::vector<FlowState> snapshots;  // decimated
  FlowState final_state;
  TimeScheme scheme = TimeScheme::kLinearlyImplicit;

  /// First snapshot with t >= t_query; throws ArgumentError past the end.
  const FlowState& snapshot_at_or_after(double t_query) const;
  std::vector<double> dt_sequence() const;
};

struct RunOptions {
  double t_end = 1.0;
  double dt0 = 1e-2;
  double dt_max = 0.1;
  /// Keep every k-th accepted step as a snapshot (t = 0 and t_end always kept).
  int snapshot_every = 1;
  /// Adaptive target on the relative change of sup |phi_dot| per step.
  double target_change = 0.1;
  StepOptions step;
  std::optional<ScalarField> phi_inf;
  /// When non-empty, the run follows exactly these steps (no adaptivity);
  /// used to give two runs the same step schedule.
  std::vector<double> fixed_dts;
  bool record_residual = true;
  /// Called after every accepted step.
  std::function<void(const FlowState&)> observer;
};

/// Runs from phi0 to t_end. Throws InternalError on non-finite diagnostics;
/// step errors propagate.
Trajectory run(const FlowProblem& problem, const ScalarField& phi0, const RunOptions& options);

/// I = sum phi f_mu * cell volume.
double weighted_integral(const FlowProblem& problem, const ScalarField& phi);

/// B(t) = log(sum det theta_t * cell volume / (C(n,kappa) e^{-(n-kappa)t} * mass f_mu)).
double integral_bound(const FlowProblem& problem, double t);

struct IntegralReport {
  std::vector<double> t;
  std::vector<double> i_plus_i_prime;
  std::vector<double> bound;
  std::vector<double> excess;
  double max_excess = 0.0;
};

/// I' is the scheme's realized rate: the implicit step reproduces the flow at
/// the state it lands on, the explicit step at the state it leaves, so I' at
/// row k is rows[k].i_rate or rows[k + 1].i_rate respectively. Fills
/// rows[].excess. Throws ArgumentError with fewer than 2 rows.
IntegralReport integral_diagnostic(const FlowProblem& problem, Trajectory& trajectory);

}  // namespace krf

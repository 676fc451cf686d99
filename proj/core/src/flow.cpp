// SPDX-License-Identifier: Apache-2.0
#include "krf/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "krf/error.hpp"
#include "krf/parallel.hpp"

namespace krf {

namespace {

void node_coords(const TorusGrid& g, std::size_t node, double* y) {
  for (int d = 0; d < g.n_dims(); ++d) y[d] = g.coordinate(node, d);
}

std::vector<double> reaction_offsets(const FlowProblem& problem, double t) {
  std::vector<double> b(problem.grid.node_count(), 0.0);
  if (problem.reaction.is_identity()) return b;
  const auto n = static_cast<std::size_t>(problem.n());
  parallel_for(b.size(), [&](std::size_t i) {
    double y[kMaxDims];
    node_coords(problem.grid, i, y);
    b[i] = problem.reaction.offset_at(std::span<const double>(y, n), t);
  });
  return b;
}

double sup_abs(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

}  // namespace

std::vector<double> flow_drive(const FlowProblem& problem, double t, const ScalarField& phi,
                               const HessianStencil& stencil) {
  const double norm = collapse_factor(problem, t);
  std::vector<double> g(phi.size());
  parallel_for(phi.size(), [&](std::size_t i) {
    const StencilDeterminant d = stencil_determinant(theta_at_node(problem, i, t), phi, i, stencil);
    if (!d.definite) throw AdmissibilityError("theta_t + D^2 phi is not positive definite", i);
    g[i] = std::log(d.det) - std::log(norm * problem.f_mu[i]);
  });
  return g;
}

FlowState initial_state(const FlowProblem& problem, const ScalarField& phi0, const HessianStencil& stencil) {
  if (!(phi0.grid == problem.grid)) throw ArgumentError("phi0 lives on a different grid");
  if (!phi0.all_finite()) throw ArgumentError("phi0 has non-finite values");
  const std::vector<double> g = flow_drive(problem, 0.0, phi0, stencil);
  const std::vector<double> b = reaction_offsets(problem, 0.0);
  FlowState s;
  s.t = 0.0;
  s.phi = phi0;
  s.last_phi_dot = ScalarField(problem.grid);
  const double a = problem.reaction.slope();
  for (std::size_t i = 0; i < g.size(); ++i) s.last_phi_dot[i] = g[i] - (a * phi0[i] + b[i]);
  return s;
}

FlowStepper::FlowStepper(const FlowProblem& problem, StepOptions options)
    : problem_(&problem),
      options_(std::move(options)),
      lu_(std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>()) {
  if (options_.scheme == TimeScheme::kLinearlyImplicit &&
      options_.stencil.scheme() != StencilScheme::kCentral) {
    throw ArgumentError("the linearly implicit scheme requires the central stencil");
  }
  if (!(options_.dt_min > 0.0)) throw ArgumentError("dt_min must be > 0");
}

bool FlowStepper::try_step(const FlowState& state, double dt, FlowState& out, std::size_t& bad_node) {
  const FlowProblem& p = *problem_;
  const std::size_t nodes = p.grid.node_count();
  const double t1 = state.t + dt;
  const double a = p.reaction.slope();
  const std::vector<double> b = reaction_offsets(p, t1);

  ScalarField next(p.grid);
  try {
    if (options_.scheme == TimeScheme::kExplicit) {
      const std::vector<double> g = flow_drive(p, state.t, state.phi, options_.stencil);
      for (std::size_t i = 0; i < nodes; ++i) {
        next[i] = (state.phi[i] + dt * (g[i] - b[i])) / (1.0 + a * dt);
      }
      flow_drive(p, t1, next, options_.stencil);
    } else {
      const MetricField theta = theta_at(p, t1);
      const LogDetLinearization lin = linearize_log_det(theta, state.phi);
      const double log_norm = std::log(collapse_factor(p, t1));
      Eigen::VectorXd rhs(static_cast<Eigen::Index>(nodes));
      for (std::size_t i = 0; i < nodes; ++i) {
        const double g = lin.log_det[i] - log_norm - std::log(p.f_mu[i]);
        rhs(static_cast<Eigen::Index>(i)) = g - (a * state.phi[i] + b[i]);
      }
      Eigen::SparseMatrix<double> sys = -lin.jacobian;
      const double diag = 1.0 / dt + a;
      for (Eigen::Index i = 0; i < sys.rows(); ++i) sys.coeffRef(i, i) += diag;
      sys.makeCompressed();
      if (!analyzed_) {
        lu_->analyzePattern(sys);
        analyzed_ = true;
      }
      lu_->factorize(sys);
      if (lu_->info() != Eigen::Success) throw SolverError("flow step: sparse factorization failed");
      const Eigen::VectorXd delta = lu_->solve(rhs);
      for (std::size_t i = 0; i < nodes; ++i) next[i] = state.phi[i] + delta(static_cast<Eigen::Index>(i));
      log_det_field(theta, next);
    }
  } catch (const AdmissibilityError& e) {
    bad_node = e.node();
    return false;
  }
  if (!next.all_finite()) return false;

  out.t = t1;
  out.step_index = state.step_index + 1;
  out.last_phi_dot = ScalarField(p.grid);
  for (std::size_t i = 0; i < nodes; ++i) out.last_phi_dot[i] = (next[i] - state.phi[i]) / dt;
  out.phi = std::move(next);
  return true;
}

StepResult FlowStepper::step(const FlowState& state, double dt) {
  if (!(dt > 0.0)) throw ArgumentError("step: dt must be > 0");
  if (!(state.phi.grid == problem_->grid)) throw ArgumentError("step: state lives on a different grid");
  StepResult r;
  double h = dt;
  std::size_t bad = 0;
  for (;;) {
    if (try_step(state, h, r.state, bad)) {
      r.dt = h;
      return r;
    }
    h *= 0.5;
    ++r.halvings;
    if (h < options_.dt_min) {
      throw StabilityError("step size fell below dt_min while restoring definiteness", bad, state.t);
    }
  }
}

FlowState step(const FlowProblem& problem, const FlowState& state, double dt, const StepOptions& options) {
  FlowStepper stepper(problem, options);
  return stepper.step(state, dt).state;
}

double explicit_monotone_dt(const FlowProblem& problem, double t, const ScalarField& phi,
                            const HessianStencil& stencil) {
  const TorusGrid& g = problem.grid;
  const int n = g.n_dims();
  std::vector<double> rate(g.node_count(), 0.0);
  parallel_for(g.node_count(), [&](std::size_t i) {
    const SmallMatrix theta = theta_at_node(problem, i, t);
    if (stencil.scheme() == StencilScheme::kCentral) {
      const SmallMatrix m = theta + central_hessian_at(phi, i);
      const SmallMatrix inv = m.inverse();
      double s = 0.0;
      for (int a = 0; a < n; ++a) s += 2.0 * inv(a, a) / (g.spacing(a) * g.spacing(a));
      rate[i] = s;
      return;
    }
    double worst = 0.0;
    for (const auto& basis : stencil.bases()) {
      double s = 0.0;
      for (int k : basis) {
        const auto& e = stencil.directions()[static_cast<std::size_t>(k)];
        SmallVector v(n);
        for (int d = 0; d < n; ++d) v(d) = e[static_cast<std::size_t>(d)] * g.spacing(d);
        const double len2 = v.squaredNorm();
        const double q = v.dot(theta * v) / len2 + directional_second_difference(phi, i, e);
        s += q > 0.0 ? 2.0 / (len2 * q) : std::numeric_limits<double>::infinity();
      }
      worst = std::max(worst, s);
    }
    rate[i] = worst;
  });
  const double top = *std::max_element(rate.begin(), rate.end());
  return top > 0.0 ? 1.0 / top : std::numeric_limits<double>::infinity();
}

const FlowState& Trajectory::snapshot_at_or_after(double t_query) const {
  for (const FlowState& s : snapshots) {
    if (s.t >= t_query - 1e-12) return s;
  }
  throw ArgumentError("no snapshot at or after t = " + std::to_string(t_query));
}

std::vector<double> Trajectory::dt_sequence() const {
  std::vector<double> out;
  for (std::size_t k = 1; k < rows.size(); ++k) out.push_back(rows[k].dt);
  return out;
}

double weighted_integral(const FlowProblem& problem, const ScalarField& phi) {
  std::vector<double> w(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) w[i] = phi[i] * problem.f_mu[i];
  return compensated_sum(w) * problem.grid.cell_volume();
}

double integral_bound(const FlowProblem& problem, double t) {
  std::vector<double> dets(problem.grid.node_count());
  parallel_for(dets.size(), [&](std::size_t i) { dets[i] = theta_at_node(problem, i, t).determinant(); });
  const double volume = compensated_sum(dets) * problem.grid.cell_volume();
  return std::log(volume / (collapse_factor(problem, t) * problem.f_mu.integral()));
}

namespace {

DiagnosticRow make_row(const FlowProblem& problem, const FlowState& s, double dt, const RunOptions& opt) {
  DiagnosticRow row;
  row.t = s.t;
  row.sup_phi = s.phi.sup();
  row.inf_phi = s.phi.inf();
  row.i_t = weighted_integral(problem, s.phi);
  row.i_rate = weighted_integral(problem, s.last_phi_dot);
  row.dt = dt;
  row.dist_static = std::numeric_limits<double>::quiet_NaN();
  if (opt.phi_inf) {
    double d = 0.0;
    for (std::size_t i = 0; i < s.phi.size(); ++i) d = std::max(d, std::abs(s.phi[i] - (*opt.phi_inf)[i]));
    row.dist_static = d;
  }
  if (opt.record_residual) {
    const ResidualField r = residual(problem, s.t, s.phi, s.last_phi_dot, opt.step.stencil);
    row.max_residual = sup_abs(r.r);
  }
  if (!std::isfinite(row.sup_phi) || !std::isfinite(row.inf_phi) || !std::isfinite(row.i_t)) {
    throw InternalError("non-finite flow diagnostics at t = " + std::to_string(s.t));
  }
  return row;
}

}  // namespace

Trajectory run(const FlowProblem& problem, const ScalarField& phi0, const RunOptions& options) {
  if (!(options.t_end >= 0.0)) throw ArgumentError("run: t_end must be >= 0");
  if (!(options.dt0 > 0.0) || !(options.dt_max > 0.0)) throw ArgumentError("run: dt0 and dt_max must be > 0");
  if (options.snapshot_every < 1) throw ArgumentError("run: snapshot_every must be >= 1");
  if (options.phi_inf && !(options.phi_inf->grid == problem.grid)) {
    throw ArgumentError("run: phi_inf lives on a different grid");
  }

  Trajectory traj;
  traj.scheme = options.step.scheme;
  FlowState state = initial_state(problem, phi0, options.step.stencil);
  traj.rows.push_back(make_row(problem, state, 0.0, options));
  traj.snapshots.push_back(state);

  FlowStepper stepper(problem, options.step);
  const bool fixed = !options.fixed_dts.empty();
  double dt = std::min(options.dt0, options.dt_max);
  double rate = sup_abs(state.last_phi_dot.values);
  std::size_t k = 0;
  while (state.t < options.t_end - 1e-12) {
    double h;
    if (fixed) {
      if (k >= options.fixed_dts.size()) break;
      h = options.fixed_dts[k];
    } else {
      h = std::min(dt, options.t_end - state.t);
    }
    StepResult res = stepper.step(state, h);
    if (fixed && res.halvings > 0) {
      throw StabilityError("fixed step schedule could not be followed", 0, state.t);
    }
    state = std::move(res.state);
    ++k;

    traj.rows.push_back(make_row(problem, state, res.dt, options));
    const bool last = state.t >= options.t_end - 1e-12 || (fixed && k == options.fixed_dts.size());
    if (state.step_index % options.snapshot_every == 0 || last) traj.snapshots.push_back(state);
    if (options.observer) options.observer(state);

    if (!fixed) {
      const double new_rate = sup_abs(state.last_phi_dot.values);
      const double change = std::abs(new_rate - rate) / std::max(rate, 1e-9);
      rate = new_rate;
      if (res.halvings > 0) dt = res.dt;
      if (change > options.target_change) {
        dt = std::max(0.5 * dt, 10.0 * options.step.dt_min);
      } else if (change < 0.5 * options.target_change) {
        dt = std::min(1.25 * dt, options.dt_max);
      }
    }
  }
  traj.final_state = state;
  return traj;
}

IntegralReport integral_diagnostic(const FlowProblem& problem, Trajectory& trajectory) {
  auto& rows = trajectory.rows;
  if (rows.size() < 2) throw ArgumentError("integral_diagnostic: need at least 2 samples");
  IntegralReport rep;
  rep.max_excess = -std::numeric_limits<double>::infinity();
  const std::size_t m = rows.size();
  for (std::size_t k = 0; k < m; ++k) {
    const bool ahead = trajectory.scheme == TimeScheme::kExplicit && k > 0 && k + 1 < m;
    const double deriv = ahead ? rows[k + 1].i_rate : rows[k].i_rate;
    const double lhs = deriv + rows[k].i_t;
    const double bound = integral_bound(problem, rows[k].t);
    rep.t.push_back(rows[k].t);
    rep.i_plus_i_prime.push_back(lhs);
    rep.bound.push_back(bound);
    rep.excess.push_back(lhs - bound);
    rows[k].excess = lhs - bound;
    rep.max_excess = std::max(rep.max_excess, lhs - bound);
  }
  return rep;
}

}  // namespace krf

// SPDX-License-Identifier: Apache-2.0
#include "krf/static_solver.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "krf/error.hpp"
#include "krf/flow.hpp"
#include "krf/ma_operator.hpp"
#include "krf/parallel.hpp"

namespace krf {

namespace {

double equation_residual(const std::vector<double>& log_det, const ScalarField& psi, const ScalarField& w,
                         double w_sup) {
  double worst = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    worst = std::max(worst, std::abs(std::exp(log_det[i]) - std::exp(psi[i]) * w[i]));
  }
  return worst / w_sup;
}

ScalarField initial_guess(const MetricField& x, const ScalarField& w) {
  std::vector<double> g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) g[i] = std::log(x.at(i).determinant() / w[i]);
  return ScalarField(w.grid, compensated_sum(g) / static_cast<double>(g.size()));
}

std::vector<double> history_values(const std::vector<std::pair<int, double>>& h) {
  std::vector<double> out;
  for (const auto& [k, v] : h) out.push_back(v);
  return out;
}

StaticSolution newton(const MetricField& x, const ScalarField& w, double tol, int max_iter) {
  const double w_sup = w.sup();
  const auto nn = static_cast<Eigen::Index>(w.size());
  StaticSolution sol;
  sol.psi = initial_guess(x, w);
  std::vector<double> log_det;
  try {
    log_det = log_det_field(x, sol.psi);
  } catch (const AdmissibilityError& e) {
    throw SolverError(std::string("static solve: initial guess not admissible: ") + e.what());
  }
  double res = equation_residual(log_det, sol.psi, w, w_sup);
  sol.residual_history.emplace_back(0, res);

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool analyzed = false;
  for (int it = 1; res > tol; ++it) {
    if (it > max_iter) {
      throw SolverError("static solve: damped Newton did not converge in " + std::to_string(max_iter) +
                            " iterations",
                        history_values(sol.residual_history));
    }
    const LogDetLinearization lin = linearize_log_det(x, sol.psi);
    Eigen::SparseMatrix<double> sys = lin.jacobian;
    for (Eigen::Index i = 0; i < nn; ++i) sys.coeffRef(i, i) -= 1.0;
    sys.makeCompressed();
    if (!analyzed) {
      lu.analyzePattern(sys);
      analyzed = true;
    }
    lu.factorize(sys);
    if (lu.info() != Eigen::Success) {
      throw SolverError("static solve: singular Newton system", history_values(sol.residual_history));
    }
    Eigen::VectorXd rhs(nn);
    for (Eigen::Index i = 0; i < nn; ++i) {
      const auto u = static_cast<std::size_t>(i);
      rhs(i) = -(lin.log_det[u] - sol.psi[u] - std::log(w[u]));
    }
    const Eigen::VectorXd delta = lu.solve(rhs);

    double step = 1.0;
    for (;;) {
      ScalarField trial = sol.psi;
      for (std::size_t i = 0; i < trial.size(); ++i) trial[i] += step * delta(static_cast<Eigen::Index>(i));
      bool accepted = false;
      try {
        std::vector<double> ld = log_det_field(x, trial);
        const double r = equation_residual(ld, trial, w, w_sup);
        if (r < res || r <= tol) {
          sol.psi = std::move(trial);
          log_det = std::move(ld);
          res = r;
          accepted = true;
        }
      } catch (const AdmissibilityError&) {
      }
      if (accepted) break;
      step *= 0.5;
      if (step < 1.0 / 1024.0) {
        throw SolverError("static solve: no damping step keeps X + D^2 psi definite and reduces the residual",
                          history_values(sol.residual_history));
      }
    }
    sol.residual_history.emplace_back(it, res);
  }
  sol.final_residual = res;
  return sol;
}

StaticSolution pseudo_time(const MetricField& x, const ScalarField& w, double tol, int max_iter) {
  // The kappa = n flow with A0 = Achi = X and f_mu = W has this equation as its
  // stationary point; reuse the flow stepper with a fixed pseudo step.
  const FlowProblem p = make_problem(w.grid, x, x, w);
  const double w_sup = w.sup();
  FlowState state = initial_state(p, initial_guess(x, w));
  FlowStepper stepper(p);
  StaticSolution sol;
  double res = equation_residual(log_det_field(x, state.phi), state.phi, w, w_sup);
  sol.residual_history.emplace_back(0, res);
  constexpr double kPseudoDt = 1.0;
  for (int it = 1; res > tol; ++it) {
    if (it > max_iter) {
      throw SolverError("static solve: pseudo-time iteration did not converge in " + std::to_string(max_iter) +
                            " steps",
                        history_values(sol.residual_history));
    }
    try {
      state = stepper.step(state, kPseudoDt).state;
    } catch (const StabilityError& e) {
      throw SolverError(std::string("static solve: pseudo-time step failed: ") + e.what(),
                        history_values(sol.residual_history));
    }
    res = equation_residual(log_det_field(x, state.phi), state.phi, w, w_sup);
    sol.residual_history.emplace_back(it, res);
  }
  sol.psi = state.phi;
  sol.final_residual = res;
  return sol;
}

}  // namespace

ScalarField base_density(const FlowProblem& problem, const SemiFlatField& semiflat) {
  const ScalarField w = pushforward_density(problem);
  const int m = problem.grid.fiber_dims();
  ScalarField out(w.grid);
  for (std::size_t b = 0; b < w.size(); ++b) {
    out[b] = problem.binom * w[b] / semiflat.fiber_volume(b, m);
  }
  return out;
}

MetricField base_metric(const FlowProblem& problem) {
  const int kappa = problem.kappa();
  const TorusGrid base = problem.grid.base_grid();
  MetricField x(base, kappa);
  for (std::size_t b = 0; b < base.node_count(); ++b) {
    x.set(b, problem.achi.at(problem.grid.compose(b, 0)).block(0, 0, kappa, kappa));
  }
  return x;
}

StaticSolution solve_base_equation(const MetricField& x, const ScalarField& w, StaticMethod method, double tol,
                                   int max_iter) {
  if (!(x.grid() == w.grid)) throw ArgumentError("static solve: X and W live on different grids");
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0) || !std::isfinite(w[i])) {
      throw ModelError("static solve: right-hand side density must be > 0 (node " + std::to_string(i) + ")");
    }
  }
  if (!(tol > 0.0)) throw ArgumentError("static solve: tol must be > 0");
  if (max_iter < 1) throw ArgumentError("static solve: max_iter must be >= 1");
  return method == StaticMethod::kDampedNewton ? newton(x, w, tol, max_iter) : pseudo_time(x, w, tol, max_iter);
}

StaticSolution solve_static(const FlowProblem& problem, StaticMethod method, double tol, int max_iter,
                            const SemiFlatField* semiflat) {
  std::optional<SemiFlatField> own;
  if (semiflat == nullptr) {
    own = semiflat_solve(problem, 1e-12);
    semiflat = &*own;
  }
  StaticSolution sol =
      solve_base_equation(base_metric(problem), base_density(problem, *semiflat), method, tol, max_iter);
  sol.lifted = lift_to_total(problem, sol.psi);
  return sol;
}

ScalarField lift_to_total(const FlowProblem& problem, const ScalarField& psi) {
  if (!(psi.grid == problem.grid.base_grid())) {
    throw ArgumentError("lift_to_total: psi does not live on the base grid");
  }
  ScalarField out(problem.grid);
  const std::size_t fibers = problem.grid.fiber_count();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = psi[i / fibers];
  return out;
}

ScalarField semiflat_identity_defect(const FlowProblem& problem, const ScalarField& psi_lifted,
                                     const ScalarField& rho) {
  const auto kappa = static_cast<std::size_t>(problem.kappa());
  ScalarField out(problem.grid);
  parallel_for(out.size(), [&](std::size_t i) {
    const SmallMatrix chi = problem.achi.at(i) + central_hessian_at(psi_lifted, i);
    const SmallMatrix sf = problem.a0.at(i) + central_hessian_at(rho, i);
    const double mixed = pencil_coefficients(chi, sf)[kappa] / problem.binom;
    out[i] = std::abs(std::log(mixed / (std::exp(psi_lifted[i]) * problem.f_mu[i])));
  });
  return out;
}

}  // namespace krf

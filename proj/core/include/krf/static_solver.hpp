// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "krf/geometry.hpp"

namespace krf {

enum class StaticMethod { kDampedNewton, kPseudoTime };

struct StaticSolution {
  ScalarField psi;  // on the base grid
  std::vector<std::pair<int, double>> residual_history;
  ScalarField lifted;  // on the full grid, constant along fibers (empty for raw solves)
  double final_residual = 0.0;
};

/// Right-hand side density of the base equation in determinant units:
/// W(y_b) = C(n, kappa) w(y_b) / V(y_b), with w the fiber pushforward of f_mu
/// and V(y_b) = c(y_b) (2 pi)^(n - kappa) the semi-flat fiber volume.
ScalarField base_density(const FlowProblem& problem, const SemiFlatField& semiflat);

/// Base Achi block as a kappa x kappa metric on the base grid.
MetricField base_metric(const FlowProblem& problem);

/// Solves det(X + D^2 psi) = e^psi W on X's grid. Convergence means
/// sup |det(X + D^2 psi) - e^psi W| <= tol * sup W.
/// Throws ModelError if W has a non-positive node, SolverError when no damping
/// step keeps X + D^2 psi definite or max_iter is exceeded (the error carries
/// the residual history).
StaticSolution solve_base_equation(const MetricField& x, const ScalarField& w, StaticMethod method,
                                   double tol, int max_iter);

/// The twisted equation of the model: solves the base equation with
/// X = Achi base block and W = base_density, then lifts psi to the total
/// space. The semi-flat data is computed with tolerance 1e-12 when not given.
StaticSolution solve_static(const FlowProblem& problem, StaticMethod method, double tol, int max_iter,
                            const SemiFlatField* semiflat = nullptr);

/// Full-grid field equal to psi(y_b) along every fiber. Throws ArgumentError
/// when psi does not live on the problem's base grid.
ScalarField lift_to_total(const FlowProblem& problem, const ScalarField& psi);

/// Nodewise |log[ D_kappa(chi_psi, omega_SF) / (e^psi f_mu) ]| where D_kappa
/// is the mixed density (lambda^kappa coefficient of det(lambda chi_psi +
/// omega_SF) over C(n, kappa)), chi_psi = Achi + D^2 psi_lifted and
/// omega_SF = A0 + D^2 rho. Vanishes up to solver tolerance when f_mu is
/// constant along fibers.
ScalarField semiflat_identity_defect(const FlowProblem& problem, const ScalarField& psi_lifted,
                                     const ScalarField& rho);

}  // namespace krf

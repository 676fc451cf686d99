// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/SparseCore>
#include <array>
#include <cstdint>
#include <vector>

#include "krf/geometry.hpp"
#include "krf/grid.hpp"

namespace krf {

enum class StencilScheme { kCentral, kWide };

/// Discretization of the Hessian. The central scheme uses the usual 3-point
/// second differences and the 4-point cross difference. The wide scheme
/// replaces the determinant by a minimum over orthogonal direction bases of
/// products of directional second differences, which makes the discrete
/// operator monotone.
class HessianStencil {
 public:
  using Direction = std::array<int, kMaxDims>;

  static HessianStencil central();
  /// Integer directions with max-norm <= radius on `grid`, together with every
  /// basis of n mutually orthogonal directions (orthogonal in physical
  /// coordinates). Throws ArgumentError for radius < 1.
  static HessianStencil wide(const TorusGrid& grid, int radius = 1);

  StencilScheme scheme() const noexcept { return scheme_; }
  int radius() const noexcept { return radius_; }
  int dims() const noexcept { return dims_; }
  const std::vector<Direction>& directions() const noexcept { return directions_; }
  /// Each basis lists n indices into directions().
  const std::vector<std::vector<int>>& bases() const noexcept { return bases_; }
  /// Indices of the directions that appear in some basis.
  const std::vector<int>& used_directions() const noexcept { return used_; }

 private:
  StencilScheme scheme_ = StencilScheme::kCentral;
  int radius_ = 1;
  int dims_ = 0;
  std::vector<Direction> directions_;
  std::vector<std::vector<int>> bases_;
  std::vector<int> used_;
};

/// Central-difference Hessian at one node (periodic wrap).
SmallMatrix central_hessian_at(const ScalarField& field, std::size_t node);

/// Second difference of `field` along the integer direction e, divided by the
/// squared physical length of e * h.
double directional_second_difference(const ScalarField& field, std::size_t node,
                                     const HessianStencil::Direction& e);

/// Per-node second-difference matrices. The wide scheme has no single matrix,
/// so it also returns the central matrix; the difference only matters inside
/// stencil_determinant.
MetricField discrete_hessian(const ScalarField& field,
                             const HessianStencil& stencil = HessianStencil::central());

struct StencilDeterminant {
  double det = 0.0;       // clamped determinant
  bool definite = false;  // strictly definite (admissible)
};

/// Discrete det_+(theta + D^2 phi) at one node.
StencilDeterminant stencil_determinant(const SmallMatrix& theta, const ScalarField& phi,
                                       std::size_t node, const HessianStencil& stencil);

/// C(n, kappa) * e^{-(n - kappa) t}: the collapsing normalization of the flow.
double collapse_factor(const FlowProblem& problem, double t);

/// det_+(theta_t + D^2 phi) / (C(n, kappa) e^{-(n - kappa) t}).
ScalarField ma_density(const FlowProblem& problem, double t, const ScalarField& phi,
                       const HessianStencil& stencil = HessianStencil::central());

/// As ma_density but without the clamp: throws AdmissibilityError at the first
/// node where theta_t + D^2 phi is not positive definite.
ScalarField ma_density_strict(const FlowProblem& problem, double t, const ScalarField& phi,
                              const HessianStencil& stencil = HessianStencil::central());

enum class ResidualTag : std::uint8_t { kNeither = 0, kSubOk = 1, kSuperOk = 2, kBoth = 3 };

inline bool is_sub_ok(ResidualTag tag) { return (static_cast<int>(tag) & 1) != 0; }
inline bool is_super_ok(ResidualTag tag) { return (static_cast<int>(tag) & 2) != 0; }

struct ResidualOptions {
  double tol = 0.0;
  double relative_floor = 1e-12;    // density floor as a multiple of f_mu
  double absolute_floor = 1e-300;
};

struct ResidualField {
  TorusGrid grid;
  std::vector<double> r;
  std::vector<ResidualTag> tags;
  std::vector<char> admissible;
  double tol = 0.0;

  /// Largest amount by which r falls below -tol among nodes in `mask`
  /// (all nodes when mask is empty); inadmissible nodes count as +infinity.
  double worst_sub_violation(const std::vector<char>& mask = {}) const;
  /// Largest amount by which r exceeds tol among nodes in `mask`.
  double worst_super_violation(const std::vector<char>& mask = {}) const;
};

/// r = log(max(ma_density, floor)) - log f_mu - phi_dot - F(t, x, phi) with
/// floor = max(relative_floor * f_mu, absolute_floor). A node is sub_ok when
/// the matrix is definite and r >= -tol, super_ok when r <= tol.
/// Throws ConfigurationError when a floor is <= 0, ArgumentError on grid mismatch.
ResidualField residual(const FlowProblem& problem, double t, const ScalarField& phi,
                       const ScalarField& phi_dot,
                       const HessianStencil& stencil = HessianStencil::central(),
                       const ResidualOptions& options = {});

/// log det(theta + D^2 phi) with the central scheme, and its derivative
/// d -> tr(M^{-1} D^2 d) as a sparse matrix over grid nodes.
struct LogDetLinearization {
  std::vector<double> log_det;
  Eigen::SparseMatrix<double> jacobian;
};

/// Throws AdmissibilityError if theta + D^2 phi is not positive definite somewhere.
LogDetLinearization linearize_log_det(const MetricField& theta, const ScalarField& phi);

/// log det(theta + D^2 phi) only; throws AdmissibilityError as above.
std::vector<double> log_det_field(const MetricField& theta, const ScalarField& phi);

}  // namespace krf

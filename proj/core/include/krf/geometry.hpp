// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "krf/expression.hpp"
#include "krf/grid.hpp"

namespace krf {

/// The reaction term F(t, x, r) of the flow. Identity means F = r; affine
/// means F = slope * r + offset(t, x) with slope >= 0 so F is non-decreasing
/// in r.
class ReactionSpec {
 public:
  enum class Kind { kIdentity, kAffine };

  static ReactionSpec identity();
  /// Throws ModelError if slope < 0.
  static ReactionSpec affine(double slope, Expression offset);

  Kind kind() const noexcept { return kind_; }
  double slope() const noexcept { return slope_; }
  const Expression& offset() const noexcept { return offset_; }
  bool is_identity() const noexcept { return kind_ == Kind::kIdentity; }

  /// Offset b(t, y); zero for identity.
  double offset_at(std::span<const double> y, double t) const;
  double operator()(std::span<const double> y, double t, double r) const {
    return slope_ * r + offset_at(y, t);
  }

 private:
  Kind kind_ = Kind::kIdentity;
  double slope_ = 1.0;
  Expression offset_;
};

/// Scale factors applied by build_product_problem.
struct Normalization {
  double f_mu_mass_before = 1.0;
  double mixed_mass_before = 1.0;
  double f_mu_scale = 1.0;
  double a0_scale = 1.0;
  double achi_scale = 1.0;
};

/// Full model geometry: metrics for omega_0 (a0) and chi (achi), reference
/// density f_mu and the reaction. achi is an n x n field that vanishes outside
/// the leading kappa x kappa block and is constant along fibers.
struct FlowProblem {
  TorusGrid grid;
  MetricField a0;
  MetricField achi;
  ScalarField f_mu;
  ReactionSpec reaction;
  double binom = 1.0;  // C(n, kappa)
  Normalization normalization;

  int n() const noexcept { return grid.n_dims(); }
  int kappa() const noexcept { return grid.base_dims(); }
};

/// Expression-level description of a model, as read from a config file.
struct ModelSpec {
  int n_dims = 1;
  std::vector<int> points;
  int kappa = 1;
  /// Upper triangle of A0 (row-major, n x n); missing entries default to the
  /// identity.
  std::vector<std::vector<std::optional<Expression>>> a0;
  /// Optional potential u whose analytic Hessian is added to A0, giving a
  /// closed form A0 = A + D^2 u.
  std::optional<Expression> a0_potential;
  /// Upper triangle of the kappa x kappa base block of chi.
  std::vector<std::vector<std::optional<Expression>>> achi;
  Expression f_mu = Expression::constant(1.0);
  ReactionSpec reaction = ReactionSpec::identity();
  bool normalize = true;
};

/// Validates raw fields and assembles a problem without rescaling.
/// Throws ModelError for indefinite metrics, a chi block leaking outside the
/// base or varying along fibers, or a non-positive density.
FlowProblem make_problem(TorusGrid grid, MetricField a0, MetricField achi, ScalarField f_mu,
                         ReactionSpec reaction = ReactionSpec::identity());

/// Samples the model description on its grid and, when requested, rescales so that the
/// f_mu mass and the mixed volume of (chi^kappa, omega_0^(n-kappa)) both equal
/// one. The mixed volume is normalized through A0 when kappa < n and through
/// chi when kappa == n.
FlowProblem build_product_problem(const ModelSpec& spec);

/// Nodewise density of chi^kappa wedge omega_0^(n-kappa) in determinant units:
/// the lambda^kappa coefficient of det(lambda * achi + a0) divided by C(n, kappa).
ScalarField mixed_volume_density(const FlowProblem& problem);

/// theta_t = e^{-t} A0 + (1 - e^{-t}) Achi at a single node.
SmallMatrix theta_at_node(const FlowProblem& problem, std::size_t node, double t);

/// theta_t at every node. Throws ArgumentError for t < 0.
MetricField theta_at(const FlowProblem& problem, double t);

/// Fiber integral w(y_b) = sum over the fiber of f_mu times the fiber cell
/// volume, on the base grid.
ScalarField pushforward_density(const FlowProblem& problem);

/// Fiberwise periodic Monge-Ampere solution: det(A0_ff + D^2_fiber rho) equals
/// a constant c(y_b) on each fiber, with fiber-mean-zero rho.
struct SemiFlatField {
  ScalarField rho;                       // on the full grid
  std::vector<double> fiber_constants;   // c(y_b), one per base node
  double max_residual = 0.0;             // sup |det / c - 1| over all nodes
  double max_fiber_mean = 0.0;           // sup |fiber mean of rho|
  int max_iterations = 0;

  /// Fiber volume V(y_b) = c(y_b) * (2 pi)^(n - kappa).
  double fiber_volume(std::size_t base_node, int fiber_dims) const;
};

inline constexpr double kMinSemiflatTolerance = 1e-14;

/// Solves the fiber problems with Newton's method (unknowns rho and log c).
/// Throws SolverError when tol < kMinSemiflatTolerance or Newton stalls.
SemiFlatField semiflat_solve(const FlowProblem& problem, double tol, int max_iter = 60);

struct RegularitySample {
  double t = 0.0;
  double t_prime = 0.0;
  double ratio_bound = 0.0;  // smallest E for this pair
};

/// Two-sided comparability of theta_t at nearby times.
struct RegularityCertificate {
  double epsilon = 0.0;
  double e_of_epsilon = 0.0;
  std::vector<RegularitySample> samples;
  double floor_scale = 0.0;  // theta_t >= floor_scale * Achi for all sampled t
  bool floor_ok = false;
};

/// Throws ArgumentError for epsilon <= 0, t_max < 0 or sample_count < 2;
/// InternalError if theta_t is indefinite somewhere.
RegularityCertificate check_regular_family(const FlowProblem& problem, double epsilon, double t_max,
                                           int sample_count);

}  // namespace krf

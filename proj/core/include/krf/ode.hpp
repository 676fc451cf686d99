// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace krf {

using Forcing = std::function<double(double)>;

struct OdeSample {
  double t = 0.0;
  double y = 0.0;
};

/// Solution of y' + y = R(t) with y(t_start) = y_start, for t >= t_start.
/// Evaluation is either closed form or adaptive Gauss-Kronrod quadrature of
/// the integrating-factor formula y(t) = e^{-(t-t0)} y0 + int_{t0}^t e^{s-t} R(s) ds.
class OdeSolution {
 public:
  OdeSolution() = default;
  OdeSolution(std::string id, std::map<std::string, double> parameters, Forcing forcing,
              std::function<double(double)> evaluator, double t_start = 0.0);

  const std::string& id() const noexcept { return id_; }
  const std::map<std::string, double>& parameters() const noexcept { return parameters_; }
  double t_start() const noexcept { return t_start_; }

  /// y(t). Throws ArgumentError for t < t_start.
  double operator()(double t) const;
  /// y'(t) = R(t) - y(t).
  double derivative(double t) const;
  double forcing(double t) const;

  /// Samples recorded at construction (the t_grid passed to the solver).
  const std::vector<OdeSample>& samples() const noexcept { return samples_; }
  void record(const std::vector<double>& t_grid);

  /// Largest |quadrature - RK4| seen during the construction cross-check, or
  /// a negative value when no cross-check was run.
  double rk4_discrepancy() const noexcept { return rk4_discrepancy_; }
  void set_rk4_discrepancy(double v) noexcept { rk4_discrepancy_ = v; }

 private:
  std::string id_;
  std::map<std::string, double> parameters_;
  Forcing forcing_;
  std::function<double(double)> evaluator_;
  double t_start_ = 0.0;
  std::vector<OdeSample> samples_;
  double rk4_discrepancy_ = -1.0;
};

/// Analytic value of y on (0, t_small], used to start RK4 away from a
/// singular forcing.
using LocalExpansion = std::function<double(double)>;

/// Adaptive quadrature evaluator for y' + y = R, y(0) = 0. Uses the
/// substitution s = tau^2 so that forcings with a logarithmic singularity at
/// 0 give a bounded integrand. When `expansion` is supplied, RK4 started at
/// t = 1e-6 is run over t_grid and the largest difference is stored.
/// Throws ArgumentError if R is non-finite on (0, max t] or grows faster than
/// 1/s at 0.
OdeSolution solve_linear_reaction(Forcing forcing, const std::vector<double>& t_grid,
                                  LocalExpansion expansion = {}, std::string id = "generic");

/// Same for y(t0) = y0 on [t0, infinity) with a forcing that is smooth there.
OdeSolution solve_linear_reaction_from(Forcing forcing, double t0, double y0,
                                       const std::vector<double>& t_grid,
                                       std::string id = "generic");

/// Classic RK4 for y' = R(t) - y from (t0, y0) to t1, with geometric steps
/// (ratio 1.01) near t0 when t0 is small and at most `max_step` afterwards.
double rk4_linear_reaction(const Forcing& forcing, double t0, double y0, double t1,
                           double max_step = 1e-3);

/// h' + h = kappa ln(1 - e^{-t}), h(0) = 0, in closed form:
/// h = kappa [ -t e^{-t} + (1 - e^{-t}) ln(1 - e^{-t}) ].
OdeSolution barrier_h(int kappa);

/// g' + g = kappa ln(1 + e^{B - t}), g(0) = 0, in closed form with b = e^B:
/// g = kappa [ b t e^{-t} + (1 + b e^{-t}) ln(1 + b e^{-t}) - e^{-t} (1 + b) ln(1 + b) ].
OdeSolution barrier_g(int kappa, double B);

/// max over t in samples of |y(t)| e^t / (1 + t): the constant in the
/// (1 + t) e^{-t} envelope, measured on the given times.
double measured_envelope_constant(const OdeSolution& y, const std::vector<double>& times);

}  // namespace krf

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <vector>

namespace krf {

/// Largest supported model dimension n. Keeps per-node matrices on the stack.
inline constexpr int kMaxDims = 4;

using SmallMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDims, kMaxDims>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDims, 1>;

/// Relative symmetry tolerance accepted for "symmetric" inputs.
inline constexpr double kSymmetryTolerance = 1e-12;

bool is_symmetric(const SmallMatrix& m, double rel_tol = kSymmetryTolerance);

/// Eigenvalues in ascending order (self-adjoint tridiagonal QR).
SmallVector symmetric_eigenvalues(const SmallMatrix& m);

/// Determinant with the (.)_+ clamp: det(m) when m is positive semidefinite,
/// zero otherwise. Semidefiniteness is decided on the smallest eigenvalue with
/// tolerance -1e-12 * ||m||; ties at zero count as semidefinite.
/// Throws ArgumentError on non-symmetric input.
double det_plus(const SmallMatrix& m);

/// True if the smallest eigenvalue is > 0 (strictly definite).
bool is_positive_definite(const SmallMatrix& m);

/// Generalized eigenvalues of the pencil (a, b) with b positive definite:
/// the values lambda with a v = lambda b v, ascending.
SmallVector generalized_eigenvalues(const SmallMatrix& a, const SmallMatrix& b);

/// Coefficients c_0..c_n of the polynomial lambda -> det(lambda * p + q),
/// with q positive definite. c_j = det(q) * e_j(mu) where mu are the
/// generalized eigenvalues of (p, q).
std::vector<double> pencil_coefficients(const SmallMatrix& p, const SmallMatrix& q);

/// Binomial coefficient C(n, k) as a double.
double binomial(int n, int k);

}  // namespace krf

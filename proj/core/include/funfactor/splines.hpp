#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace funfactor {

/// O'Sullivan mixed-model spline basis on [0,1]:
/// C(t) = [1, t, z_1(t), ..., z_K'(t)], where the z-block is the cubic
/// B-spline basis mapped onto the positive-eigenvalue directions of the
/// roughness penalty, scaled so that a unit ridge penalty on the z
/// coefficients equals the integrated squared second derivative.
struct SplineBasis {
  int num_penalized = 0;  // K'
  int degree = 3;
  Eigen::VectorXd interior_knots;   // K' - 2 values in (0,1)
  Eigen::VectorXd knot_vector;      // clamped, boundary knots repeated degree+1 times
  Eigen::MatrixXd z_map;            // (K'+2) x K'
  Eigen::VectorXd penalty_eigenvalues;  // descending, all K'+2
  int penalty_null_dim = 0;

  int num_columns() const { return num_penalized + 2; }
};

/// K' = max{min(floor(n/4), 40), 7} for n pooled distinct observation times.
int choose_num_basis(long total_obs);

/// K'-2 interior knots at equally spaced quantiles of the pooled distinct
/// times; strictly increasing and strictly inside (0,1).
Eigen::VectorXd place_knots(std::span<const double> times, int num_penalized);

Eigen::VectorXd clamped_knot_vector(const Eigen::VectorXd& interior, int degree, double lo = 0.0, double hi = 1.0);

/// All B-spline basis functions (or their `deriv`-th derivatives) at each x.
/// Arguments outside the boundary knots are clamped to them.
Eigen::MatrixXd bspline_basis(const Eigen::VectorXd& x, const Eigen::VectorXd& knot_vector, int degree,
                              int deriv = 0);

/// Omega_kl = integral of B_k''(t) B_l''(t) over the knot range, computed
/// exactly by Gauss-Legendre quadrature on each knot interval.
Eigen::MatrixXd roughness_penalty(const Eigen::VectorXd& knot_vector, int degree);

struct OSullivanTransform {
  Eigen::MatrixXd z_map;
  Eigen::MatrixXd z_design;
  Eigen::VectorXd eigenvalues;  // descending
  int null_dim = 0;
};

/// Spectral split of the penalty, Omega = U D U^T; z_map = U_+ D_+^{-1/2}.
/// Throws PenaltyRankError unless exactly `num_penalized` eigenvalues exceed
/// 1e-10 times the largest.
OSullivanTransform osullivan_transform(const Eigen::MatrixXd& raw_design, const Eigen::MatrixXd& penalty,
                                       int num_penalized);

SplineBasis make_spline_basis(const Eigen::VectorXd& interior_knots, int degree = 3);

/// Basis for a pooled set of observation times (duplicates allowed). When
/// `num_penalized` is positive it overrides the count rule.
SplineBasis make_spline_basis_for_times(std::span<const double> times, int num_penalized = 0);

/// n x (K'+2) design [1, t, z(t)].
Eigen::MatrixXd build_design(const Eigen::VectorXd& times, const SplineBasis& basis);

/// Equally spaced grid of `size` points on [0,1] and its trapezoid weights.
Eigen::VectorXd uniform_grid(int size);
Eigen::VectorXd trapezoid_weights(int size);

}  // namespace funfactor

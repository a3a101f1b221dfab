#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "funfactor/fit.hpp"
#include "funfactor/hyperparameters.hpp"
#include "funfactor/splines.hpp"
#include "funfactor/variational_state.hpp"

namespace funfactor {

/// FPCA of a set of curves sampled on a uniform grid.
struct OrthonormalFactor {
  Eigen::MatrixXd eigenfunctions;  // G x L, orthonormal under trapezoid weights
  Eigen::VectorXd eigenvalues;     // L, non-increasing
  Eigen::MatrixXd scores;          // N x L
};

/// Eigendecomposition of the empirical second moment (1/N) sum_i h_i(s) h_i(t)
/// of the rows of `curves` (N x G) under trapezoid quadrature. Each
/// eigenfunction is signed so that its integral is non-negative. Throws
/// DegenerateFactor when every curve is numerically zero.
OrthonormalFactor orthonormalize(const Eigen::MatrixXd& curves, int num_components);

/// Posterior-mean factor curves h_iq = C(grid) V_q m_iq, as an N x G matrix.
Eigen::MatrixXd factor_curves(const VariationalState& state, const SplineBasis& basis, int q,
                              const Eigen::VectorXd& grid);
OrthonormalFactor orthonormalize_factor(const VariationalState& state, const SplineBasis& basis, int q,
                                        const Eigen::VectorXd& grid);

/// lambda / sum(lambda). Throws DegenerateFactor when all are zero.
Eigen::VectorXd compute_pve(const Eigen::VectorXd& eigenvalues);
/// Smallest L whose cumulative PVE reaches `threshold`.
int select_components(const Eigen::VectorXd& pve, double threshold = 0.99);

/// PPI_q = 1 - prod_j (1 - gamma*_jq), one value per factor.
Eigen::VectorXd factor_inclusion_probabilities(const VariationalState& state);
/// Indices (0-based) of factors with PPI above `threshold`.
std::vector<int> select_factors(const VariationalState& state, double threshold = 0.5);

struct TrajectoryBands {
  Eigen::VectorXd grid;
  Eigen::VectorXd mean;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// Pointwise predictive bands for variable j of subject i, from `draws`
/// independent samples of every variational factor plus observation noise.
TrajectoryBands predict_trajectory_bands(const VariationalState& state, const SplineBasis& basis, int j, int i,
                                         const Eigen::VectorXd& grid, double level = 0.95, int draws = 500,
                                         std::uint64_t seed = 1);

/// Bands for every (variable, subject) pair, delivered one variable at a time
/// as N x G matrices (mean, lower, upper). Eigen coefficients and scores are
/// drawn once per sample and shared across variables.
using BandVisitor =
    std::function<void(int j, const Eigen::MatrixXd& mean, const Eigen::MatrixXd& lower, const Eigen::MatrixXd& upper)>;
void predict_all_bands(const VariationalState& state, const SplineBasis& basis, const Eigen::VectorXd& grid,
                       double level, int draws, std::uint64_t seed, const BandVisitor& visit, int threads = 1);

struct FactorResult {
  int factor = 0;  // 0-based
  double ppi = 0.0;
  bool retained = false;
  bool degenerate = false;
  Eigen::MatrixXd eigenfunctions;  // G x L_max
  Eigen::VectorXd eigenvalues;
  Eigen::VectorXd pve;
  Eigen::MatrixXd scores;  // N x L_max
  int num_components = 0;
};

struct FitResult {
  Eigen::VectorXd grid;
  std::vector<FactorResult> factors;  // every q < Q_max
  std::vector<int> retained;
  Eigen::MatrixXd gamma;           // p x Q
  Eigen::MatrixXd loading_mean;    // p x Q
  Eigen::MatrixXd mean_functions;  // G x p
  Eigen::VectorXd noise_variance;  // E[sigma^2_eps,j]
  std::vector<ElboRecord> trace;
  FitStatus status = FitStatus::converged;
  SplineBasis basis;
  Hyperparameters hyper;
};

FitResult summarize_fit(const VariationalState& state, const SplineBasis& basis, const Hyperparameters& hyper,
                        std::vector<ElboRecord> trace = {}, FitStatus status = FitStatus::converged,
                        double component_threshold = 0.99, double factor_threshold = 0.5);

}  // namespace funfactor

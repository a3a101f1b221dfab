#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "funfactor/dataset.hpp"
#include "funfactor/rng.hpp"

namespace funfactor {

enum class MeanKind { periodic, zero };
std::string to_string(MeanKind kind);
MeanKind mean_kind_from_string(const std::string& name);

/// Factor-specific inclusion probability pi_q ~ Beta(a, b), or every loading
/// active when `dense` is set.
struct SparsitySpec {
  bool dense = false;
  double a = 1.0;
  double b = 10.0;
};

struct SimConfig {
  int N = 100;
  int p = 20000;
  int Q = 3;
  int L = 2;
  int n_min = 5;
  int n_max = 10;
  SparsitySpec sparsity;
  MeanKind mean_kind = MeanKind::periodic;
  double noise_sd = 1.0;
  std::vector<int> eigen_degrees{2, 3};
  int eigen_interior_knots = 4;
  int grid_size = 100;
  std::uint64_t seed = 1;
  /// Keep the drawn noise in SimTruth (memory N * n_i * p).
  bool keep_noise = false;
};

/// N = 100, p = 20000, Q = 3, L = 2, n_i ~ U{5..10}, pi_q ~ Beta(1,10), periodic means.
SimConfig preset_large_sparse();
/// N = 30, p = 100, Q = 2, L = 3, n_i ~ U{2..10}, pi_q ~ Beta(1,1), zero means.
SimConfig preset_moderate_dense();
void validate(const SimConfig& cfg);

/// L orthonormal functions psi = F R^T, where F holds raw B-spline functions
/// f_k (each with its own degree) and R is the Gram-Schmidt mixing matrix.
struct EigenfunctionSet {
  std::vector<int> degrees;
  std::vector<Eigen::VectorXd> knot_vectors;
  std::vector<Eigen::VectorXd> coefficients;
  Eigen::MatrixXd mixing;  // L x L, lower triangular

  int size() const { return static_cast<int>(degrees.size()); }
  /// n x L values at arbitrary times in [0,1].
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& t) const;
};

struct SimTruth {
  SimConfig config;
  Eigen::VectorXd grid;
  Eigen::VectorXd inclusion_probs;  // pi_q
  Eigen::MatrixXi support;          // p x Q, 0/1
  Eigen::MatrixXd loadings;         // p x Q
  std::vector<EigenfunctionSet> eigen_sets;      // per q
  std::vector<Eigen::MatrixXd> eigenfunctions;  // per q: G x L on the grid
  std::vector<Eigen::MatrixXd> scores;          // per q: N x L
  Eigen::VectorXd phases;                       // p (periodic means)
  Eigen::MatrixXd mean_functions;               // G x p
  std::vector<Eigen::VectorXd> times;           // per subject
  std::vector<Eigen::MatrixXd> noise;           // per subject, when kept

  /// Noise-free value of variable j for subject i at times t.
  Eigen::VectorXd signal(int i, int j, const Eigen::VectorXd& t) const;
  /// n x p noise-free values for subject i at times t.
  Eigen::MatrixXd signal_matrix(int i, const Eigen::VectorXd& t) const;
  /// Factor process h_iq on the grid, N x G.
  Eigen::MatrixXd factor_curves(int q) const;
  double mean_value(int j, double t) const;
};

/// Draws L orthonormal functions (trapezoid inner product on `grid_size`
/// points). Throws RankDeficiency after 10 failed draws.
EigenfunctionSet generate_eigenfunctions(int L, const std::vector<int>& degrees, int interior_knots, int grid_size,
                                         Rng& rng);
/// Q sets, from a fresh stream of `seed`.
std::vector<EigenfunctionSet> generate_eigenfunctions(int Q, int L, const std::vector<int>& degrees,
                                                      int interior_knots, int grid_size, std::uint64_t seed);

/// One factor column: pi ~ Beta(a,b), support ~ Bernoulli(pi) resampled until
/// non-empty, values N(0,1). Returns (pi, support, values).
struct LoadingColumn {
  double pi = 1.0;
  Eigen::VectorXi support;
  Eigen::VectorXd values;
};
LoadingColumn draw_loading_column(int p, const SparsitySpec& sparsity, Rng& rng);

std::pair<LongitudinalDataset, SimTruth> generate_dataset(const SimConfig& cfg);

}  // namespace funfactor

#pragma once

#include <cmath>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace funfactor {

double digamma(double x);
double log_gamma(double x);
double log_beta(double a, double b);

/// Gaussian variational factor N(mean, cov) with its cached log-determinant.
struct GaussianFactor {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double log_det = 0.0;

  /// Replaces the covariance and refreshes log_det. Throws NumericalPD when
  /// `cov` is not positive definite.
  void set_cov(Eigen::MatrixXd new_cov);
};

/// Inverse-Gamma(shape, rate) factor.
struct InvGammaFactor {
  double shape = 1.0;
  double rate = 1.0;

  double mean_inv() const { return shape / rate; }
  double mean_log() const { return std::log(rate) - digamma(shape); }
  double entropy() const;
};

/// Variance parameter with its half-Cauchy auxiliary:
/// sigma^2 | a ~ IG(1/2, 1/a), a ~ IG(1/2, 1/A^2).
/// When `fixed` holds a value the pair is replaced by a point mass.
struct VariancePair {
  InvGammaFactor var;
  InvGammaFactor aux;
  std::optional<double> fixed;

  double mean_inv() const { return fixed ? 1.0 / *fixed : var.mean_inv(); }
  double mean_log() const { return fixed ? std::log(*fixed) : var.mean_log(); }
  /// E[sigma^2]; infinite when the shape is at most one.
  double mean() const;
};

/// q(b, gamma) = gamma* N(mu, var) + (1 - gamma*) delta_0.
struct SpikeSlabFactor {
  double gamma = 0.5;
  double mu = 0.0;
  double var = 1.0;

  double mean() const { return gamma * mu; }
  double second_moment() const { return gamma * (mu * mu + var); }
};

struct BetaFactor {
  double a = 1.0;
  double b = 1.0;

  double mean_log() const { return digamma(a) - digamma(a + b); }
  double mean_log1m() const { return digamma(b) - digamma(a + b); }
};

/// Every mean-field factor of the model. Flat vectors are indexed
/// eigen (q*L + l), scores (i*Q + q), loadings (j*Q + q).
struct VariationalState {
  int N = 0;
  int p = 0;
  int Q = 0;
  int L = 0;
  int K = 0;

  std::vector<GaussianFactor> mean_coef;
  std::vector<GaussianFactor> eigen_coef;
  std::vector<GaussianFactor> scores;
  std::vector<VariancePair> noise;
  std::vector<VariancePair> mean_smoothing;
  std::vector<VariancePair> eigen_smoothing;
  std::vector<SpikeSlabFactor> loadings;
  std::vector<BetaFactor> weights;
  bool loadings_frozen = false;

  GaussianFactor& eigen(int q, int l) { return eigen_coef[static_cast<std::size_t>(q * L + l)]; }
  const GaussianFactor& eigen(int q, int l) const { return eigen_coef[static_cast<std::size_t>(q * L + l)]; }
  GaussianFactor& score(int i, int q) { return scores[static_cast<std::size_t>(i * Q + q)]; }
  const GaussianFactor& score(int i, int q) const { return scores[static_cast<std::size_t>(i * Q + q)]; }
  SpikeSlabFactor& loading(int j, int q) { return loadings[static_cast<std::size_t>(j * Q + q)]; }
  const SpikeSlabFactor& loading(int j, int q) const { return loadings[static_cast<std::size_t>(j * Q + q)]; }
  VariancePair& eigen_smooth(int q, int l) { return eigen_smoothing[static_cast<std::size_t>(q * L + l)]; }
  const VariancePair& eigen_smooth(int q, int l) const {
    return eigen_smoothing[static_cast<std::size_t>(q * L + l)];
  }

  /// K x L matrix of eigen-coefficient means for factor q.
  Eigen::MatrixXd eigen_means(int q) const;
  /// p x Q matrices E[b] and E[b^2].
  Eigen::MatrixXd loading_means() const;
  Eigen::MatrixXd loading_second_moments() const;
  Eigen::MatrixXd inclusion_probabilities() const;
  /// E[1/sigma^2_eps,j] for every variable.
  Eigen::VectorXd noise_precisions() const;

  /// Throws NumericalPD / NonPositiveShape / InvalidArgument on any violated
  /// factor invariant.
  void check_invariants() const;
};

void save_state(const VariationalState& state, std::ostream& out);
VariationalState load_state(std::istream& in);

}  // namespace funfactor

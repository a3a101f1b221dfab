#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "funfactor/hyperparameters.hpp"
#include "funfactor/model_data.hpp"
#include "funfactor/variational_state.hpp"

namespace funfactor {

/// Expectations of the factor part Σ_q b_jq C_i V_q ζ_iq that the updates and
/// the ELBO need, built from the current state by exact recomputation.
struct FactorStats {
  // Eigen-coefficient part.
  std::vector<Eigen::MatrixXd> vmean;   // per q: K x L
  std::vector<Eigen::MatrixXd> gram_v;  // per (i,q): G_i V_q
  std::vector<Eigen::MatrixXd> eh;      // per (i,q): E[V_q^T G_i V_q]
  // Score part.
  Eigen::VectorXd quad;        // Q: sum_i E[zeta^T H zeta]
  Eigen::MatrixXd cross;       // Q x Q: sum_i g_iq^T G_i g_iq', g_iq = V_q m_iq
  Eigen::MatrixXd gram_g_sum;  // K x Q: sum_i G_i g_iq
  Eigen::MatrixXd proj;        // Q x p: sum_i (C_i g_iq)^T Y_i
};

void compute_eigen_stats(const ModelData& data, const VariationalState& state, int threads, FactorStats& stats);
/// Requires the eigen part of `stats` to be current.
void compute_score_stats(const ModelData& data, const VariationalState& state, int threads, FactorStats& stats);
FactorStats compute_factor_stats(const ModelData& data, const VariationalState& state, int threads = 1);

/// E_q ||y^(j) - fitted^(j)||^2 summed over subjects. `eb`, `eb2` are the
/// p x Q loading moments.
double expected_rss(const ModelData& data, const VariationalState& state, const FactorStats& stats,
                    const Eigen::MatrixXd& eb, const Eigen::MatrixXd& eb2, int j);

/// Deterministic starting point: ridge mean fit, small random eigen
/// coefficients and standard-normal scores, then loadings per `hyper.init`
/// (see InitKind).
VariationalState init_state(const ModelData& data, const Hyperparameters& hyper, std::uint64_t seed);

/// Annealed coordinate-ascent updates at inverse temperature c = 1/T. Every
/// method writes one block of `state` in place; statistics derived from other
/// blocks are refreshed lazily.
class CaviEngine {
 public:
  CaviEngine(const ModelData& data, const Hyperparameters& hyper, VariationalState& state);

  void update_mean_coeffs(int j, double c);
  void update_loading_pair(int j, int q, double c);
  void update_eigen_coeffs(int q, int l, double c);
  void update_scores(int i, int q, double c);
  void update_noise_variance(int j, double c);
  void update_noise_scale(int j, double c);
  void update_noise_aux(int j, double c);
  void update_mean_smoothing_scale(int j, double c);
  void update_mean_smoothing_aux(int j, double c);
  void update_eigen_smoothing_scale(int q, int l, double c);
  void update_eigen_smoothing_aux(int q, int l, double c);
  void update_smoothing_variances(double c);
  void update_sparsity_weight(int q, double c);

  /// One full sweep in the fixed order: mean coefficients, loadings, eigen
  /// coefficients, scores, noise, smoothing, sparsity weights.
  void sweep(double c);

  /// Call after modifying the state from outside the engine.
  void refresh();

  double expected_rss(int j);
  const FactorStats& stats();

 private:
  const ModelData& data_;
  const Hyperparameters& hyper_;
  VariationalState& st_;
  int threads_;
  double c0_;
  double d0_;
  double inv_a2_;
  double inv_sb2_;

  Eigen::MatrixXd eb_;   // p x Q
  Eigen::MatrixXd eb2_;  // p x Q
  Eigen::VectorXd tau_;  // p

  FactorStats stats_;
  bool eigen_valid_ = false;
  bool score_valid_ = false;

  // Loading/noise-weighted data: z_iq = C_i^T Y_i w_q - G_i M_mu w_q with
  // w_q = tau ⊙ E[b_q]; omega = sum_j tau_j E[b_j] E[b_j]^T; s_q = sum_j tau_j E[b_jq^2].
  std::vector<Eigen::MatrixXd> z_;  // per i: K x Q
  Eigen::MatrixXd omega_;
  Eigen::VectorXd s_;
  bool weighted_valid_ = false;

  void ensure_eigen();
  void ensure_score();
  void ensure_weighted();
  void sync_loading(int j, int q);

  void mean_impl(int j, double c);
  void loading_impl(int j, int q, double c);
  void eigen_impl(int q, int l, double c);
  void scores_impl(int i, int q, double c);
  void noise_scale_impl(int j, double c);
  void noise_aux_impl(int j, double c);
};

}  // namespace funfactor

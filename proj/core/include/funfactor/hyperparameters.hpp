#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace funfactor {

enum class ScheduleKind { geometric, harmonic, linear };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

/// Starting point for the loadings and factor curves. `spectral` takes the
/// loadings from a truncated SVD of the mean-fit residuals and fits the eigen
/// coefficients and scores to them before the first sweep; `random` starts
/// from gamma* = 1/2, mu_b = 0 and random eigen coefficients.
enum class InitKind { spectral, random };
std::string to_string(InitKind kind);
InitKind init_kind_from_string(const std::string& name);

/// Annealing schedule: `levels` temperatures decreasing from t_max to 1.
/// t_max < 2 keeps every annealed inverse-Gamma shape 2c-1 positive.
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::geometric;
  double t_max = 1.9;
  int levels = 100;
};

/// Beta(c0, d0) prior on each factor's inclusion weight. d0 defaults to p.
struct OmegaPrior {
  double c0 = 1.0;
  std::optional<double> d0;

  double resolved_d0(int p) const { return d0.value_or(static_cast<double>(p)); }
};

struct Hyperparameters {
  int q_max = 5;
  int l_max = 5;
  double half_cauchy_scale = 1e5;  // A
  double sigma_beta = 1e5;         // sd of the unpenalised intercept/slope coefficients
  OmegaPrior omega;
  ScheduleSpec schedule;
  double tol = 1e-5;
  int max_iter = 1000;
  int sweeps_per_temperature = 1;
  int dense_grid_size = 100;
  std::uint64_t seed = 1;
  int threads = 1;
  InitKind init = InitKind::spectral;
  int warmup_passes = 10;  // mean-only sweeps, then eigen/score passes, of the spectral start

  /// Forces K' instead of the pooled-count rule.
  std::optional<int> num_penalized;

  // Sub-model controls. A fixed variance replaces its inverse-Gamma pair by a
  // point mass; frozen loadings keep every gamma* at zero.
  bool freeze_loadings = false;
  std::optional<double> fixed_noise_variance;
  std::optional<double> fixed_mean_smoothing;
  std::optional<double> fixed_eigen_smoothing;
};

void validate(const ScheduleSpec& spec);
void validate(const Hyperparameters& hyper);

}  // namespace funfactor

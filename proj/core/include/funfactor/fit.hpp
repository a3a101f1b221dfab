#pragma once

#include <functional>
#include <vector>

#include "funfactor/elbo.hpp"
#include "funfactor/hyperparameters.hpp"
#include "funfactor/model_data.hpp"
#include "funfactor/variational_state.hpp"

namespace funfactor {

struct ElboRecord {
  int sweep = 0;
  double temperature = 1.0;
  double heated = 0.0;  // L_T
  double elbo = 0.0;    // L at T = 1
  double seconds = 0.0;
};

enum class FitStatus { converged, max_iter_exceeded };
std::string to_string(FitStatus status);

struct FitOutput {
  VariationalState state;
  std::vector<ElboRecord> trace;
  FitStatus status = FitStatus::converged;
  int unit_temperature_sweeps = 0;
  double seconds = 0.0;
};

using FitCallback = std::function<void(const ElboRecord&)>;

/// Runs every annealed level for `sweeps_per_temperature` sweeps, then sweeps
/// at T = 1 until the relative ELBO change drops below `tol` or `max_iter`
/// sweeps have run at T = 1.
FitOutput fit(const ModelData& data, const Hyperparameters& hyper, const FitCallback& on_sweep = {});
/// Same, starting from a given state.
FitOutput fit_from(const ModelData& data, const Hyperparameters& hyper, VariationalState init,
                   const FitCallback& on_sweep = {});

}  // namespace funfactor

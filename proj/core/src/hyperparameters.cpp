#include "funfactor/hyperparameters.hpp"

#include <cmath>

#include "funfactor/error.hpp"

namespace funfactor {

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::geometric: return "geometric";
    case ScheduleKind::harmonic: return "harmonic";
    case ScheduleKind::linear: return "linear";
  }
  return "geometric";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "geometric") return ScheduleKind::geometric;
  if (name == "harmonic") return ScheduleKind::harmonic;
  if (name == "linear") return ScheduleKind::linear;
  throw Error(ErrorKind::InvalidArgument, "unknown schedule kind '" + name + "'");
}

std::string to_string(InitKind kind) { return kind == InitKind::spectral ? "spectral" : "random"; }

InitKind init_kind_from_string(const std::string& name) {
  if (name == "spectral") return InitKind::spectral;
  if (name == "random") return InitKind::random;
  throw Error(ErrorKind::InvalidArgument, "unknown init kind '" + name + "'");
}

void validate(const ScheduleSpec& spec) {
  if (spec.levels < 1) throw Error(ErrorKind::InvalidArgument, "schedule levels must be >= 1");
  if (spec.levels > 1 && !(spec.t_max > 1.0 && spec.t_max < 2.0))
    throw Error(ErrorKind::InvalidArgument, "schedule t_max must lie in (1, 2)");
}

namespace {
void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw Error(ErrorKind::InvalidArgument, std::string(name) + " must be positive and finite");
}
}  // namespace

void validate(const Hyperparameters& h) {
  if (h.q_max < 1) throw Error(ErrorKind::InvalidArgument, "q_max must be >= 1");
  if (h.l_max < 1) throw Error(ErrorKind::InvalidArgument, "l_max must be >= 1");
  require_positive(h.half_cauchy_scale, "A");
  require_positive(h.sigma_beta, "sigma_beta");
  require_positive(h.omega.c0, "omega c0");
  if (h.omega.d0) require_positive(*h.omega.d0, "omega d0");
  require_positive(h.tol, "tol");
  if (h.max_iter < 1) throw Error(ErrorKind::InvalidArgument, "max_iter must be >= 1");
  if (h.sweeps_per_temperature < 1)
    throw Error(ErrorKind::InvalidArgument, "sweeps_per_temperature must be >= 1");
  if (h.dense_grid_size < 2) throw Error(ErrorKind::InvalidArgument, "dense_grid_size must be >= 2");
  if (h.warmup_passes < 0) throw Error(ErrorKind::InvalidArgument, "warmup_passes must be >= 0");
  if (h.threads < 1) throw Error(ErrorKind::InvalidArgument, "threads must be >= 1");
  if (h.num_penalized && *h.num_penalized < 7)
    throw Error(ErrorKind::InvalidArgument, "num_penalized must be >= 7");
  if (h.fixed_noise_variance) require_positive(*h.fixed_noise_variance, "fixed_noise_variance");
  if (h.fixed_mean_smoothing) require_positive(*h.fixed_mean_smoothing, "fixed_mean_smoothing");
  if (h.fixed_eigen_smoothing) require_positive(*h.fixed_eigen_smoothing, "fixed_eigen_smoothing");
  validate(h.schedule);
}

}  // namespace funfactor

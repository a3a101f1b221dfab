#include "funfactor/schedule.hpp"

#include <cmath>

namespace funfactor {

std::vector<double> make_schedule(const ScheduleSpec& spec) {
  validate(spec);
  if (spec.levels == 1) return {1.0};
  const int n = spec.levels;
  std::vector<double> temps(static_cast<std::size_t>(n));
  const double steps = n - 1;
  for (int k = 0; k < n; ++k) {
    switch (spec.kind) {
      case ScheduleKind::geometric:
        temps[k] = spec.t_max * std::pow(spec.t_max, -k / steps);
        break;
      case ScheduleKind::harmonic: {
        const double inv = 1.0 / spec.t_max + k * (1.0 - 1.0 / spec.t_max) / steps;
        temps[k] = 1.0 / inv;
        break;
      }
      case ScheduleKind::linear:
        temps[k] = spec.t_max + k * (1.0 - spec.t_max) / steps;
        break;
    }
  }
  temps.front() = spec.t_max;
  temps.back() = 1.0;
  return temps;
}

}  // namespace funfactor

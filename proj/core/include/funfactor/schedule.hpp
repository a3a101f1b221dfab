#pragma once

#include <vector>

#include "funfactor/hyperparameters.hpp"

namespace funfactor {

/// Temperatures from t_max down to exactly 1.0. Geometric spacing uses ratio
/// t_max^{-1/(levels-1)}; harmonic spaces 1/T evenly; linear spaces T evenly.
/// A single level yields {1.0}, i.e. plain variational Bayes.
std::vector<double> make_schedule(const ScheduleSpec& spec);

}  // namespace funfactor

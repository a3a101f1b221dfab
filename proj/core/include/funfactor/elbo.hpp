#pragma once

#include "funfactor/hyperparameters.hpp"
#include "funfactor/model_data.hpp"
#include "funfactor/variational_state.hpp"

namespace funfactor {

/// ELBO split into expected log joint and entropy, by block.
/// The heated bound is L_T = expected_log_joint + T * entropy.
struct ElboTerms {
  double likelihood = 0.0;
  double mean_coef = 0.0;   // E log p(nu_mu)
  double eigen_coef = 0.0;  // E log p(nu_psi)
  double scores = 0.0;
  double variances = 0.0;   // all inverse-Gamma priors
  double loadings = 0.0;    // E log p(b, gamma | omega)
  double weights = 0.0;     // E log p(omega)
  double entropy = 0.0;

  double expected_log_joint() const {
    return likelihood + mean_coef + eigen_coef + scores + variances + loadings + weights;
  }
  double value() const { return expected_log_joint() + entropy; }
  double heated(double temperature) const { return expected_log_joint() + temperature * entropy; }
};

ElboTerms compute_elbo_terms(const ModelData& data, const VariationalState& state, const Hyperparameters& hyper);

/// Heated bound at inverse temperature c (c = 1 gives the ELBO).
double compute_elbo(const ModelData& data, const VariationalState& state, const Hyperparameters& hyper,
                    double c = 1.0);

}  // namespace funfactor

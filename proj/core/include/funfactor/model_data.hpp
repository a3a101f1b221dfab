#pragma once

#include <vector>

#include <Eigen/Dense>

#include "funfactor/dataset.hpp"
#include "funfactor/splines.hpp"

namespace funfactor {

/// Data-side quantities shared by every update: per-subject designs C_i,
/// Grams C_i^T C_i and the data cross products. Built once per fit.
struct ModelData {
  const LongitudinalDataset* dataset = nullptr;
  SplineBasis basis;
  int N = 0;
  int p = 0;
  int K = 0;
  long total_obs = 0;
  std::vector<Eigen::MatrixXd> design;  // n_i x K
  std::vector<Eigen::MatrixXd> gram;    // K x K
  Eigen::MatrixXd gram_sum;             // sum_i C_i^T C_i
  Eigen::MatrixXd cross_sum;            // K x p, sum_i C_i^T Y_i
  Eigen::VectorXd y_sq;                 // p, sum_i ||y_i^(j)||^2

  const Eigen::MatrixXd& values(int i) const { return dataset->subjects[static_cast<std::size_t>(i)].values; }
  int num_penalized() const { return basis.num_penalized; }
};

/// `data` must be validated and must outlive the returned object.
ModelData build_model_data(const LongitudinalDataset& data, SplineBasis basis, int threads = 1);
/// Chooses the basis from the pooled distinct times (or the override).
ModelData build_model_data(const LongitudinalDataset& data, int num_penalized = 0, int threads = 1);

}  // namespace funfactor

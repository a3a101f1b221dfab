#include "funfactor/model_data.hpp"

#include "parallel.hpp"

namespace funfactor {

ModelData build_model_data(const LongitudinalDataset& data, SplineBasis basis, int threads) {
  ModelData m;
  m.dataset = &data;
  m.basis = std::move(basis);
  m.N = data.num_subjects();
  m.p = data.p;
  m.K = m.basis.num_columns();
  m.total_obs = data.total_observations();
  m.design.resize(static_cast<std::size_t>(m.N));
  m.gram.resize(static_cast<std::size_t>(m.N));
  std::vector<Eigen::MatrixXd> cross(static_cast<std::size_t>(m.N));
  detail::parallel_for(m.N, threads, [&](int i) {
    const auto& s = data.subjects[static_cast<std::size_t>(i)];
    const auto k = static_cast<std::size_t>(i);
    m.design[k] = build_design(s.times, m.basis);
    m.gram[k] = m.design[k].transpose() * m.design[k];
  });
  m.gram_sum = Eigen::MatrixXd::Zero(m.K, m.K);
  m.cross_sum = Eigen::MatrixXd::Zero(m.K, m.p);
  m.y_sq = Eigen::VectorXd::Zero(m.p);
  for (int i = 0; i < m.N; ++i) {
    const auto k = static_cast<std::size_t>(i);
    m.gram_sum += m.gram[k];
    m.cross_sum.noalias() += m.design[k].transpose() * m.values(i);
    m.y_sq += m.values(i).colwise().squaredNorm().transpose();
  }
  return m;
}

ModelData build_model_data(const LongitudinalDataset& data, int num_penalized, int threads) {
  const auto times = data.distinct_times();
  return build_model_data(data, make_spline_basis_for_times(times, num_penalized), threads);
}

}  // namespace funfactor

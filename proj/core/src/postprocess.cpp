#include "funfactor/postprocess.hpp"

#include <algorithm>
#include <cmath>

#include "funfactor/error.hpp"
#include "funfactor/rng.hpp"
#include "parallel.hpp"

namespace funfactor {

OrthonormalFactor orthonormalize(const Eigen::MatrixXd& curves, int num_components) {
  const auto N = curves.rows();
  const auto G = curves.cols();
  if (G < 2) throw Error(ErrorKind::GridMismatch, "grid needs at least two points");
  const Eigen::VectorXd w = trapezoid_weights(static_cast<int>(G));
  const Eigen::ArrayXd sw = w.array().sqrt();
  // A = W^{1/2} H^T / sqrt(N); A A^T is the discretised covariance operator.
  const Eigen::MatrixXd a = (sw.matrix().asDiagonal() * curves.transpose()) / std::sqrt(static_cast<double>(N));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU);
  const Eigen::VectorXd& d = svd.singularValues();
  if (d.size() == 0 || !(d[0] > 1e-150))
    throw Error(ErrorKind::DegenerateFactor, "factor curves are numerically zero");

  OrthonormalFactor out;
  out.eigenvalues = Eigen::VectorXd::Zero(num_components);
  for (int l = 0; l < num_components && l < d.size(); ++l) out.eigenvalues[l] = d[l] * d[l];
  const Eigen::MatrixXd u = svd.matrixU().leftCols(num_components);
  out.eigenfunctions = (1.0 / sw).matrix().asDiagonal() * u;
  out.scores = curves * (sw.matrix().asDiagonal() * u);
  for (int l = 0; l < num_components; ++l) {
    if (w.dot(out.eigenfunctions.col(l)) < 0.0) {
      out.eigenfunctions.col(l) *= -1.0;
      out.scores.col(l) *= -1.0;
    }
  }
  return out;
}

Eigen::MatrixXd factor_curves(const VariationalState& state, const SplineBasis& basis, int q,
                              const Eigen::VectorXd& grid) {
  const Eigen::MatrixXd cv = build_design(grid, basis) * state.eigen_means(q);  // G x L
  Eigen::MatrixXd m(state.N, state.L);
  for (int i = 0; i < state.N; ++i) m.row(i) = state.score(i, q).mean.transpose();
  return m * cv.transpose();
}

OrthonormalFactor orthonormalize_factor(const VariationalState& state, const SplineBasis& basis, int q,
                                        const Eigen::VectorXd& grid) {
  return orthonormalize(factor_curves(state, basis, q, grid), state.L);
}

Eigen::VectorXd compute_pve(const Eigen::VectorXd& eigenvalues) {
  const double total = eigenvalues.sum();
  if (!(total > 0.0)) throw Error(ErrorKind::DegenerateFactor, "all eigenvalues are zero");
  return eigenvalues / total;
}

int select_components(const Eigen::VectorXd& pve, double threshold) {
  double cum = 0.0;
  for (Eigen::Index l = 0; l < pve.size(); ++l) {
    cum += pve[l];
    // Cumulative sums of an exactly normalised vector can fall a few ulps short.
    if (cum >= threshold - 1e-12) return static_cast<int>(l + 1);
  }
  return static_cast<int>(pve.size());
}

Eigen::VectorXd factor_inclusion_probabilities(const VariationalState& state) {
  Eigen::VectorXd ppi(state.Q);
  for (int q = 0; q < state.Q; ++q) {
    double log_none = 0.0;
    for (int j = 0; j < state.p; ++j) log_none += std::log1p(-std::min(state.loading(j, q).gamma, 1.0));
    ppi[q] = -std::expm1(log_none);
  }
  return ppi;
}

std::vector<int> select_factors(const VariationalState& state, double threshold) {
  const auto ppi = factor_inclusion_probabilities(state);
  std::vector<int> keep;
  for (int q = 0; q < state.Q; ++q)
    if (ppi[q] > threshold) keep.push_back(q);
  return keep;
}

// ---------------------------------------------------------------------------
// Prediction bands

namespace {

/// Symmetric square root with negative eigenvalues clamped, so degenerate
/// (zero) covariances sample as point masses.
Eigen::MatrixXd cov_sqrt(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Eigen::VectorXd draw_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& root, Rng& rng) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
  return mean + root * z;
}

double draw_variance(const VariancePair& v, Rng& rng) {
  if (v.fixed) return *v.fixed;
  return rng.inverse_gamma(v.var.shape, v.var.rate);
}

double draw_loading(const SpikeSlabFactor& b, Rng& rng) {
  const bool on = rng.bernoulli(b.gamma);
  const double z = rng.normal();
  return on ? b.mu + std::sqrt(b.var) * z : 0.0;
}

/// Type-7 quantile of a sorted range.
double sorted_quantile(const std::vector<double>& x, double prob) {
  const double h = (static_cast<double>(x.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

}  // namespace

TrajectoryBands predict_trajectory_bands(const VariationalState& state, const SplineBasis& basis, int j, int i,
                                         const Eigen::VectorXd& grid, double level, int draws, std::uint64_t seed) {
  if (j < 0 || j >= state.p || i < 0 || i >= state.N) throw Error(ErrorKind::InvalidArgument, "band index out of range");
  const Eigen::MatrixXd cg = build_design(grid, basis);
  const auto G = grid.size();
  TrajectoryBands out;
  out.grid = grid;
  out.mean = cg * state.mean_coef[static_cast<std::size_t>(j)].mean;
  for (int q = 0; q < state.Q; ++q)
    out.mean += state.loading(j, q).mean() * (cg * (state.eigen_means(q) * state.score(i, q).mean));

  const Eigen::MatrixXd mean_root = cov_sqrt(state.mean_coef[static_cast<std::size_t>(j)].cov);
  std::vector<Eigen::MatrixXd> eigen_root(state.eigen_coef.size());
  std::vector<Eigen::MatrixXd> score_root(static_cast<std::size_t>(state.Q));
  for (std::size_t k = 0; k < eigen_root.size(); ++k) eigen_root[k] = cov_sqrt(state.eigen_coef[k].cov);
  for (int q = 0; q < state.Q; ++q) score_root[static_cast<std::size_t>(q)] = cov_sqrt(state.score(i, q).cov);

  const std::uint64_t pair_seed = derive_seed(seed, static_cast<std::uint64_t>(j) * static_cast<std::uint64_t>(state.N) + static_cast<std::uint64_t>(i));
  Eigen::MatrixXd samples(G, draws);
  for (int d = 0; d < draws; ++d) {
    Rng rng(pair_seed, static_cast<std::uint64_t>(d));
    const auto& mc = state.mean_coef[static_cast<std::size_t>(j)];
    Eigen::VectorXd coef = draw_gaussian(mc.mean, mean_root, rng);
    for (int q = 0; q < state.Q; ++q) {
      const double b = draw_loading(state.loading(j, q), rng);
      const Eigen::VectorXd zeta = draw_gaussian(state.score(i, q).mean, score_root[static_cast<std::size_t>(q)], rng);
      for (int l = 0; l < state.L; ++l) {
        const auto k = static_cast<std::size_t>(q * state.L + l);
        const Eigen::VectorXd v = draw_gaussian(state.eigen_coef[k].mean, eigen_root[k], rng);
        coef += (b * zeta[l]) * v;
      }
    }
    const double sd = std::sqrt(draw_variance(state.noise[static_cast<std::size_t>(j)], rng));
    samples.col(d) = cg * coef;
    for (Eigen::Index g = 0; g < G; ++g) samples(g, d) += sd * rng.normal();
  }
  out.lower.resize(G);
  out.upper.resize(G);
  std::vector<double> row(static_cast<std::size_t>(draws));
  for (Eigen::Index g = 0; g < G; ++g) {
    for (int d = 0; d < draws; ++d) row[static_cast<std::size_t>(d)] = samples(g, d);
    std::sort(row.begin(), row.end());
    out.lower[g] = sorted_quantile(row, 0.5 * (1.0 - level));
    out.upper[g] = sorted_quantile(row, 0.5 * (1.0 + level));
  }
  return out;
}

void predict_all_bands(const VariationalState& state, const SplineBasis& basis, const Eigen::VectorXd& grid,
                       double level, int draws, std::uint64_t seed, const BandVisitor& visit, int threads) {
  const int N = state.N;
  const int Q = state.Q;
  const int L = state.L;
  const auto G = grid.size();
  const Eigen::MatrixXd cg = build_design(grid, basis);

  std::vector<Eigen::MatrixXd> eigen_root(state.eigen_coef.size());
  for (std::size_t k = 0; k < eigen_root.size(); ++k) eigen_root[k] = cov_sqrt(state.eigen_coef[k].cov);
  std::vector<Eigen::MatrixXd> score_root(state.scores.size());
  for (std::size_t k = 0; k < score_root.size(); ++k) score_root[k] = cov_sqrt(state.scores[k].cov);

  // Posterior-mean factor curves, and sampled factor curves per draw: N x G each.
  std::vector<Eigen::MatrixXd> mean_curves(static_cast<std::size_t>(Q));
  for (int q = 0; q < Q; ++q) mean_curves[static_cast<std::size_t>(q)] = factor_curves(state, basis, q, grid);
  std::vector<Eigen::MatrixXd> drawn(static_cast<std::size_t>(draws * Q));
  const std::uint64_t factor_seed = derive_seed(seed, 0);
  detail::parallel_for(draws, threads, [&](int d) {
    Rng rng(factor_seed, static_cast<std::uint64_t>(d));
    for (int q = 0; q < Q; ++q) {
      Eigen::MatrixXd v(state.K, L);
      for (int l = 0; l < L; ++l) {
        const auto k = static_cast<std::size_t>(q * L + l);
        v.col(l) = draw_gaussian(state.eigen_coef[k].mean, eigen_root[k], rng);
      }
      Eigen::MatrixXd z(N, L);
      for (int i = 0; i < N; ++i) {
        const auto k = static_cast<std::size_t>(i * Q + q);
        z.row(i) = draw_gaussian(state.scores[k].mean, score_root[k], rng).transpose();
      }
      drawn[static_cast<std::size_t>(d * Q + q)] = z * (cg * v).transpose();
    }
  });

  Eigen::MatrixXd mean(N, G), lower(N, G), upper(N, G);
  std::vector<Eigen::MatrixXd> samples(static_cast<std::size_t>(draws));
  for (int j = 0; j < state.p; ++j) {
    const auto& mc = state.mean_coef[static_cast<std::size_t>(j)];
    const Eigen::RowVectorXd mu_curve = (cg * mc.mean).transpose();
    mean = mu_curve.replicate(N, 1);
    for (int q = 0; q < Q; ++q) mean += state.loading(j, q).mean() * mean_curves[static_cast<std::size_t>(q)];

    const Eigen::MatrixXd mean_root = cov_sqrt(mc.cov);
    const std::uint64_t var_seed = derive_seed(seed, static_cast<std::uint64_t>(j) + 1);
    detail::parallel_for(draws, threads, [&](int d) {
      Rng rng(var_seed, static_cast<std::uint64_t>(d));
      const Eigen::RowVectorXd curve = (cg * draw_gaussian(mc.mean, mean_root, rng)).transpose();
      auto& s = samples[static_cast<std::size_t>(d)];
      s = curve.replicate(N, 1);
      for (int q = 0; q < Q; ++q) {
        const double b = draw_loading(state.loading(j, q), rng);
        if (b != 0.0) s += b * drawn[static_cast<std::size_t>(d * Q + q)];
      }
      const double sd = std::sqrt(draw_variance(state.noise[static_cast<std::size_t>(j)], rng));
      for (int i = 0; i < N; ++i)
        for (Eigen::Index g = 0; g < G; ++g) s(i, g) += sd * rng.normal();
    });
    detail::parallel_for(N, threads, [&](int i) {
      std::vector<double> row(static_cast<std::size_t>(draws));
      for (Eigen::Index g = 0; g < G; ++g) {
        for (int d = 0; d < draws; ++d) row[static_cast<std::size_t>(d)] = samples[static_cast<std::size_t>(d)](i, g);
        std::sort(row.begin(), row.end());
        lower(i, g) = sorted_quantile(row, 0.5 * (1.0 - level));
        upper(i, g) = sorted_quantile(row, 0.5 * (1.0 + level));
      }
    });
    visit(j, mean, lower, upper);
  }
}

// ---------------------------------------------------------------------------

FitResult summarize_fit(const VariationalState& state, const SplineBasis& basis, const Hyperparameters& hyper,
                        std::vector<ElboRecord> trace, FitStatus status, double component_threshold,
                        double factor_threshold) {
  FitResult r;
  r.grid = uniform_grid(hyper.dense_grid_size);
  r.basis = basis;
  r.hyper = hyper;
  r.trace = std::move(trace);
  r.status = status;
  r.gamma = state.inclusion_probabilities();
  r.loading_mean = state.loading_means();
  const Eigen::MatrixXd cg = build_design(r.grid, basis);
  r.mean_functions.resize(r.grid.size(), state.p);
  r.noise_variance.resize(state.p);
  for (int j = 0; j < state.p; ++j) {
    r.mean_functions.col(j) = cg * state.mean_coef[static_cast<std::size_t>(j)].mean;
    r.noise_variance[j] = state.noise[static_cast<std::size_t>(j)].mean();
  }
  const auto ppi = factor_inclusion_probabilities(state);
  for (int q = 0; q < state.Q; ++q) {
    FactorResult f;
    f.factor = q;
    f.ppi = ppi[q];
    f.retained = ppi[q] > factor_threshold;
    try {
      auto o = orthonormalize_factor(state, basis, q, r.grid);
      f.eigenfunctions = std::move(o.eigenfunctions);
      f.eigenvalues = std::move(o.eigenvalues);
      f.scores = std::move(o.scores);
      f.pve = compute_pve(f.eigenvalues);
      f.num_components = select_components(f.pve, component_threshold);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateFactor) throw;
      f.degenerate = true;
      f.retained = false;
      f.eigenfunctions = Eigen::MatrixXd::Zero(r.grid.size(), state.L);
      f.eigenvalues = Eigen::VectorXd::Zero(state.L);
      f.pve = Eigen::VectorXd::Zero(state.L);
      f.scores = Eigen::MatrixXd::Zero(state.N, state.L);
    }
    if (f.retained) r.retained.push_back(q);
    r.factors.push_back(std::move(f));
  }
  return r;
}

}  // namespace funfactor

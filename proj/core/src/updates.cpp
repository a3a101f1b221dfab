#include "funfactor/updates.hpp"

#include <algorithm>
#include <cmath>

#include "funfactor/error.hpp"
#include "funfactor/rng.hpp"
#include "parallel.hpp"

namespace funfactor {

namespace {

constexpr int kColumnBlock = 256;

struct SpdInverse {
  Eigen::MatrixXd inverse;
  double log_det = 0.0;  // of the input matrix
};

/// Inverse of a symmetric PD matrix; one jitter retry before NumericalPD.
SpdInverse spd_inverse(Eigen::MatrixXd a) {
  a = 0.5 * (a + a.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-10 * a.diagonal().mean();
    a.diagonal().array() += jitter;
    llt.compute(a);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::NumericalPD, "precision matrix is not positive definite");
  }
  SpdInverse out;
  out.inverse = llt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  out.inverse = 0.5 * (out.inverse + out.inverse.transpose()).eval();
  out.log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return out;
}

/// q ∝ exp(c E log p) for a quadratic form with precision Λ and linear term η:
/// cov = (cΛ)^{-1}, mean = Λ^{-1} η.
void set_heated_gaussian(GaussianFactor& g, Eigen::MatrixXd precision, const Eigen::VectorXd& eta, double c) {
  const auto dim = static_cast<double>(precision.rows());
  auto inv = spd_inverse(std::move(precision));
  g.mean = inv.inverse * eta;
  g.cov = inv.inverse / c;
  g.log_det = -inv.log_det - dim * std::log(c);
}

Eigen::VectorXd prior_precision_diag(int K, double inv_sb2, double smooth_prec) {
  Eigen::VectorXd d = Eigen::VectorXd::Constant(K, smooth_prec);
  d[0] = inv_sb2;
  d[1] = inv_sb2;
  return d;
}

double penalized_energy(const GaussianFactor& g) {
  const auto kp = g.mean.size() - 2;
  return g.mean.tail(kp).squaredNorm() + g.cov.diagonal().tail(kp).sum();
}

void require_positive_shape(double shape) {
  if (!(shape > 0.0)) throw Error(ErrorKind::NonPositiveShape, "annealed inverse-Gamma shape is not positive");
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& a) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
}

/// Leading Q right singular directions of the stacked mean-fit residuals
/// R (n_tot x p), scaled by singular value / sqrt(n_tot). Randomised range
/// finder with two power iterations; R is applied implicitly per subject.
Eigen::MatrixXd residual_loadings(const ModelData& d, const Eigen::MatrixXd& coef, int Q, std::uint64_t seed) {
  const auto n_tot = static_cast<Eigen::Index>(d.total_obs);
  const auto k = std::min<Eigen::Index>(Q + 10, std::min<Eigen::Index>(d.p, n_tot));
  const auto apply = [&](const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd mx = coef * x;
    Eigen::MatrixXd out(n_tot, x.cols());
    Eigen::Index off = 0;
    for (int i = 0; i < d.N; ++i) {
      const auto& c = d.design[static_cast<std::size_t>(i)];
      out.middleRows(off, c.rows()).noalias() = d.values(i) * x;
      out.middleRows(off, c.rows()).noalias() -= c * mx;
      off += c.rows();
    }
    return out;
  };
  const auto apply_t = [&](const Eigen::MatrixXd& u) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d.p, u.cols());
    Eigen::MatrixXd cu = Eigen::MatrixXd::Zero(d.K, u.cols());
    Eigen::Index off = 0;
    for (int i = 0; i < d.N; ++i) {
      const auto& c = d.design[static_cast<std::size_t>(i)];
      out.noalias() += d.values(i).transpose() * u.middleRows(off, c.rows());
      cu.noalias() += c.transpose() * u.middleRows(off, c.rows());
      off += c.rows();
    }
    out.noalias() -= coef.transpose() * cu;
    return out;
  };
  Rng rng(seed, 3);
  Eigen::MatrixXd omega(d.p, k);
  for (Eigen::Index c = 0; c < k; ++c)
    for (Eigen::Index r = 0; r < d.p; ++r) omega(r, c) = rng.normal();
  Eigen::MatrixXd range = orthonormal_basis(apply(omega));
  for (int it = 0; it < 2; ++it) range = orthonormal_basis(apply(orthonormal_basis(apply_t(range))));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(apply_t(range), Eigen::ComputeThinU);
  Eigen::MatrixXd b0 = Eigen::MatrixXd::Zero(d.p, Q);
  const auto r = std::min<Eigen::Index>(Q, k);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_tot));
  for (Eigen::Index q = 0; q < r; ++q) b0.col(q) = svd.matrixU().col(q) * (svd.singularValues()[q] * scale);
  return b0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Sufficient statistics

void compute_eigen_stats(const ModelData& data, const VariationalState& state, int threads, FactorStats& stats) {
  const int Q = state.Q;
  const int L = state.L;
  stats.vmean.resize(static_cast<std::size_t>(Q));
  for (int q = 0; q < Q; ++q) stats.vmean[static_cast<std::size_t>(q)] = state.eigen_means(q);
  stats.gram_v.resize(static_cast<std::size_t>(data.N * Q));
  stats.eh.resize(static_cast<std::size_t>(data.N * Q));
  detail::parallel_for(data.N, threads, [&](int i) {
    const auto& G = data.gram[static_cast<std::size_t>(i)];
    for (int q = 0; q < Q; ++q) {
      const auto k = static_cast<std::size_t>(i * Q + q);
      stats.gram_v[k] = G * stats.vmean[static_cast<std::size_t>(q)];
      Eigen::MatrixXd eh = stats.vmean[static_cast<std::size_t>(q)].transpose() * stats.gram_v[k];
      for (int l = 0; l < L; ++l) eh(l, l) += G.cwiseProduct(state.eigen(q, l).cov).sum();
      stats.eh[k] = 0.5 * (eh + eh.transpose());
    }
  });
}

void compute_score_stats(const ModelData& data, const VariationalState& state, int threads, FactorStats& stats) {
  const int N = data.N;
  const int Q = state.Q;
  const int K = data.K;
  std::vector<Eigen::MatrixXd> gg(static_cast<std::size_t>(N));
  std::vector<Eigen::MatrixXd> cg(static_cast<std::size_t>(N));
  std::vector<Eigen::MatrixXd> cross_i(static_cast<std::size_t>(N));
  Eigen::MatrixXd quad_i(Q, N);
  detail::parallel_for(N, threads, [&](int i) {
    const auto ii = static_cast<std::size_t>(i);
    Eigen::MatrixXd g(K, Q);
    for (int q = 0; q < Q; ++q) g.col(q) = stats.vmean[static_cast<std::size_t>(q)] * state.score(i, q).mean;
    gg[ii] = data.gram[ii] * g;
    cg[ii] = data.design[ii] * g;
    cross_i[ii] = g.transpose() * gg[ii];
    for (int q = 0; q < Q; ++q) {
      const auto& eh = stats.eh[static_cast<std::size_t>(i * Q + q)];
      const auto& sc = state.score(i, q);
      quad_i(q, i) = eh.cwiseProduct(sc.cov).sum() + sc.mean.dot(eh * sc.mean);
    }
  });
  stats.quad = Eigen::VectorXd::Zero(Q);
  stats.cross = Eigen::MatrixXd::Zero(Q, Q);
  stats.gram_g_sum = Eigen::MatrixXd::Zero(K, Q);
  for (int i = 0; i < N; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    stats.quad += quad_i.col(i);
    stats.cross += cross_i[ii];
    stats.gram_g_sum += gg[ii];
  }
  stats.proj = Eigen::MatrixXd::Zero(Q, data.p);
  const int blocks = (data.p + kColumnBlock - 1) / kColumnBlock;
  detail::parallel_for(blocks, threads, [&](int b) {
    const int j0 = b * kColumnBlock;
    const int w = std::min(kColumnBlock, data.p - j0);
    for (int i = 0; i < N; ++i)
      stats.proj.middleCols(j0, w).noalias() += cg[static_cast<std::size_t>(i)].transpose() * data.values(i).middleCols(j0, w);
  });
}

FactorStats compute_factor_stats(const ModelData& data, const VariationalState& state, int threads) {
  FactorStats stats;
  compute_eigen_stats(data, state, threads, stats);
  compute_score_stats(data, state, threads, stats);
  return stats;
}

double expected_rss(const ModelData& data, const VariationalState& state, const FactorStats& stats,
                    const Eigen::MatrixXd& eb, const Eigen::MatrixXd& eb2, int j) {
  const auto& mc = state.mean_coef[static_cast<std::size_t>(j)];
  const auto& mu = mc.mean;
  const int Q = state.Q;
  double rss = data.y_sq[j];
  rss -= 2.0 * data.cross_sum.col(j).dot(mu);
  rss += mu.dot(data.gram_sum * mu) + data.gram_sum.cwiseProduct(mc.cov).sum();
  if (Q > 0) {
    const Eigen::VectorXd gmu = stats.gram_g_sum.transpose() * mu;
    for (int q = 0; q < Q; ++q) {
      rss += 2.0 * eb(j, q) * (gmu[q] - stats.proj(q, j));
      rss += eb2(j, q) * stats.quad[q];
      for (int r = 0; r < Q; ++r)
        if (r != q) rss += eb(j, q) * eb(j, r) * stats.cross(q, r);
    }
  }
  return std::max(rss, 0.0);
}

// ---------------------------------------------------------------------------
// Initialisation

VariationalState init_state(const ModelData& data, const Hyperparameters& hyper, std::uint64_t seed) {
  VariationalState s;
  s.N = data.N;
  s.p = data.p;
  s.Q = hyper.q_max;
  s.L = hyper.l_max;
  s.K = data.K;
  s.loadings_frozen = hyper.freeze_loadings;
  const int K = s.K;
  const int kp = data.num_penalized();
  const double inv_sb2 = 1.0 / (hyper.sigma_beta * hyper.sigma_beta);
  const double inv_a2 = 1.0 / (hyper.half_cauchy_scale * hyper.half_cauchy_scale);
  const auto n_tot = static_cast<double>(data.total_obs);

  const auto pair_at = [&](double shape, double inv_mean, std::optional<double> fixed) {
    VariancePair v;
    v.var.shape = shape;
    v.var.rate = shape / inv_mean;
    v.aux.shape = 1.0;
    v.aux.rate = inv_mean + inv_a2;
    v.fixed = fixed;
    return v;
  };

  // Ridge fit with unit penalty on the penalised block.
  const Eigen::VectorXd ridge_diag = prior_precision_diag(K, inv_sb2, 1.0);
  Eigen::MatrixXd ridge = data.gram_sum;
  ridge.diagonal() += ridge_diag;
  const auto ridge_inv = spd_inverse(ridge).inverse;
  const Eigen::MatrixXd coef = ridge_inv * data.cross_sum;

  const double smooth_shape = 0.5 * kp + 0.5;
  const double noise_shape = 0.5 * n_tot + 0.5;
  s.mean_coef.resize(static_cast<std::size_t>(s.p));
  s.noise.resize(static_cast<std::size_t>(s.p));
  s.mean_smoothing.resize(static_cast<std::size_t>(s.p));
  for (int j = 0; j < s.p; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    const Eigen::VectorXd mu = coef.col(j);
    double resid = data.y_sq[j] - 2.0 * data.cross_sum.col(j).dot(mu) + mu.dot(data.gram_sum * mu);
    resid = std::max(resid / n_tot, 1e-6);
    s.noise[jj] = pair_at(noise_shape, 1.0 / resid, hyper.fixed_noise_variance);
    s.mean_smoothing[jj] = pair_at(smooth_shape, 1.0, hyper.fixed_mean_smoothing);
    Eigen::MatrixXd prec = data.gram_sum * s.noise[jj].mean_inv();
    prec.diagonal() += prior_precision_diag(K, inv_sb2, s.mean_smoothing[jj].mean_inv());
    auto inv = spd_inverse(prec);
    s.mean_coef[jj].mean = mu;
    s.mean_coef[jj].cov = std::move(inv.inverse);
    s.mean_coef[jj].log_det = -inv.log_det;
  }

  Rng eigen_rng(seed, 1);
  s.eigen_coef.resize(static_cast<std::size_t>(s.Q * s.L));
  s.eigen_smoothing.resize(static_cast<std::size_t>(s.Q * s.L));
  for (int q = 0; q < s.Q; ++q)
    for (int l = 0; l < s.L; ++l) {
      auto& g = s.eigen(q, l);
      g.mean.resize(K);
      for (int k = 0; k < K; ++k) g.mean[k] = eigen_rng.normal(0.0, 0.1);
      g.cov = 0.1 * Eigen::MatrixXd::Identity(K, K);
      g.log_det = K * std::log(0.1);
      s.eigen_smooth(q, l) = pair_at(smooth_shape, 1.0, hyper.fixed_eigen_smoothing);
    }

  Rng score_rng(seed, 2);
  s.scores.resize(static_cast<std::size_t>(s.N * s.Q));
  for (int i = 0; i < s.N; ++i)
    for (int q = 0; q < s.Q; ++q) {
      auto& g = s.score(i, q);
      g.mean.resize(s.L);
      for (int l = 0; l < s.L; ++l) g.mean[l] = score_rng.normal();
      g.cov = Eigen::MatrixXd::Identity(s.L, s.L);
      g.log_det = 0.0;
    }

  s.loadings.assign(static_cast<std::size_t>(s.p * s.Q), SpikeSlabFactor{});
  if (s.loadings_frozen)
    for (auto& b : s.loadings) b.gamma = 0.0;
  s.weights.assign(static_cast<std::size_t>(s.Q), BetaFactor{hyper.omega.c0, hyper.omega.resolved_d0(s.p)});

  if (hyper.init == InitKind::spectral && !s.loadings_frozen && s.Q > 0) {
    // Settle the means, their smoothing and the noise without factors first.
    // Residuals from the unit-penalty ridge keep part of a curved mean, which
    // the spectral start would hand to a factor.
    VariationalState m = s;
    m.Q = 0;
    m.eigen_coef.clear();
    m.eigen_smoothing.clear();
    m.scores.clear();
    m.loadings.clear();
    m.weights.clear();
    {
      CaviEngine engine(data, hyper, m);
      for (int pass = 0; pass < hyper.warmup_passes; ++pass) engine.sweep(1.0);
    }
    Eigen::MatrixXd settled(K, s.p);
    for (int j = 0; j < s.p; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      s.mean_coef[jj] = m.mean_coef[jj];
      s.noise[jj] = m.noise[jj];
      s.mean_smoothing[jj] = m.mean_smoothing[jj];
      settled.col(j) = m.mean_coef[jj].mean;
    }
    const Eigen::MatrixXd b0 = residual_loadings(data, settled, s.Q, seed);
    for (int j = 0; j < s.p; ++j)
      for (int q = 0; q < s.Q; ++q) {
        auto& b = s.loading(j, q);
        b.gamma = 1.0;
        b.mu = b0(j, q);
        b.var = 1.0 / (1.0 + s.noise[static_cast<std::size_t>(j)].mean_inv() * n_tot);
      }
    CaviEngine engine(data, hyper, s);
    for (int pass = 0; pass < hyper.warmup_passes; ++pass) {
      for (int q = 0; q < s.Q; ++q)
        for (int l = 0; l < s.L; ++l) engine.update_eigen_coeffs(q, l, 1.0);
      for (int i = 0; i < s.N; ++i)
        for (int q = 0; q < s.Q; ++q) engine.update_scores(i, q, 1.0);
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Engine

CaviEngine::CaviEngine(const ModelData& data, const Hyperparameters& hyper, VariationalState& state)
    : data_(data),
      hyper_(hyper),
      st_(state),
      threads_(std::max(1, hyper.threads)),
      c0_(hyper.omega.c0),
      d0_(hyper.omega.resolved_d0(state.p)),
      inv_a2_(1.0 / (hyper.half_cauchy_scale * hyper.half_cauchy_scale)),
      inv_sb2_(1.0 / (hyper.sigma_beta * hyper.sigma_beta)) {
  refresh();
}

void CaviEngine::refresh() {
  eb_ = st_.loading_means();
  eb2_ = st_.loading_second_moments();
  tau_ = st_.noise_precisions();
  eigen_valid_ = false;
  score_valid_ = false;
  weighted_valid_ = false;
}

void CaviEngine::ensure_eigen() {
  if (eigen_valid_) return;
  compute_eigen_stats(data_, st_, threads_, stats_);
  eigen_valid_ = true;
  score_valid_ = false;
}

void CaviEngine::ensure_score() {
  ensure_eigen();
  if (score_valid_) return;
  compute_score_stats(data_, st_, threads_, stats_);
  score_valid_ = true;
}

void CaviEngine::ensure_weighted() {
  if (weighted_valid_) return;
  const int Q = st_.Q;
  const int K = data_.K;
  const Eigen::MatrixXd w = tau_.asDiagonal() * eb_;  // p x Q
  Eigen::MatrixXd mw = Eigen::MatrixXd::Zero(K, Q);
  for (int j = 0; j < data_.p; ++j) mw.noalias() += st_.mean_coef[static_cast<std::size_t>(j)].mean * w.row(j);
  z_.resize(static_cast<std::size_t>(data_.N));
  detail::parallel_for(data_.N, threads_, [&](int i) {
    const auto ii = static_cast<std::size_t>(i);
    const Eigen::MatrixXd yw = data_.values(i) * w;
    z_[ii] = data_.design[ii].transpose() * yw - data_.gram[ii] * mw;
  });
  omega_ = eb_.transpose() * w;
  s_ = eb2_.transpose() * tau_;
  weighted_valid_ = true;
}

const FactorStats& CaviEngine::stats() {
  ensure_score();
  return stats_;
}

double CaviEngine::expected_rss(int j) {
  ensure_score();
  return funfactor::expected_rss(data_, st_, stats_, eb_, eb2_, j);
}

void CaviEngine::sync_loading(int j, int q) {
  const auto& b = st_.loading(j, q);
  eb_(j, q) = b.mean();
  eb2_(j, q) = b.second_moment();
}

void CaviEngine::mean_impl(int j, double c) {
  const double tau = tau_[j];
  Eigen::MatrixXd prec = tau * data_.gram_sum;
  prec.diagonal() +=
      prior_precision_diag(data_.K, inv_sb2_, st_.mean_smoothing[static_cast<std::size_t>(j)].mean_inv());
  Eigen::VectorXd eta = data_.cross_sum.col(j);
  if (st_.Q > 0) eta.noalias() -= stats_.gram_g_sum * eb_.row(j).transpose();
  eta *= tau;
  set_heated_gaussian(st_.mean_coef[static_cast<std::size_t>(j)], std::move(prec), eta, c);
}

void CaviEngine::loading_impl(int j, int q, double c) {
  const double tau = tau_[j];
  const auto& mu = st_.mean_coef[static_cast<std::size_t>(j)].mean;
  double s1 = stats_.proj(q, j) - stats_.gram_g_sum.col(q).dot(mu);
  for (int r = 0; r < st_.Q; ++r)
    if (r != q) s1 -= eb_(j, r) * stats_.cross(q, r);
  const double s2 = stats_.quad[q];
  const double prec = 1.0 + tau * s2;
  auto& b = st_.loading(j, q);
  b.var = 1.0 / (c * prec);
  b.mu = tau * s1 / prec;
  const auto& w = st_.weights[static_cast<std::size_t>(q)];
  const double logit =
      c * (w.mean_log() - w.mean_log1m()) + 0.5 * (std::log(b.var) + b.mu * b.mu / b.var);
  // Stable logistic.
  b.gamma = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
  sync_loading(j, q);
}

void CaviEngine::eigen_impl(int q, int l, double c) {
  const int K = data_.K;
  const int Q = st_.Q;
  const int L = st_.L;
  const double s = s_[q];
  std::vector<Eigen::MatrixXd> v(static_cast<std::size_t>(Q));
  for (int r = 0; r < Q; ++r)
    if (r != q) v[static_cast<std::size_t>(r)] = st_.eigen_means(r);
  Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(K, K);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd u(K);
  for (int i = 0; i < data_.N; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const auto& sc = st_.score(i, q);
    const double m = sc.mean[l];
    prec.noalias() += (s * (m * m + sc.cov(l, l))) * data_.gram[ii];
    u.setZero();
    for (int r = 0; r < Q; ++r)
      if (r != q && omega_(q, r) != 0.0) u.noalias() += (m * omega_(q, r)) * (v[static_cast<std::size_t>(r)] * st_.score(i, r).mean);
    for (int k = 0; k < L; ++k)
      if (k != l) u.noalias() += (s * (m * sc.mean[k] + sc.cov(l, k))) * st_.eigen(q, k).mean;
    eta.noalias() += m * z_[ii].col(q);
    eta.noalias() -= data_.gram[ii] * u;
  }
  prec.diagonal() += prior_precision_diag(K, inv_sb2_, st_.eigen_smooth(q, l).mean_inv());
  set_heated_gaussian(st_.eigen(q, l), std::move(prec), eta, c);
}

void CaviEngine::scores_impl(int i, int q, double c) {
  const int Q = st_.Q;
  const auto k = static_cast<std::size_t>(i * Q + q);
  Eigen::MatrixXd prec = s_[q] * stats_.eh[k];
  prec.diagonal().array() += 1.0;
  Eigen::VectorXd eta = stats_.vmean[static_cast<std::size_t>(q)].transpose() * z_[static_cast<std::size_t>(i)].col(q);
  for (int r = 0; r < Q; ++r)
    if (r != q && omega_(q, r) != 0.0)
      eta.noalias() -= omega_(q, r) * (stats_.gram_v[k].transpose() *
                                       (stats_.vmean[static_cast<std::size_t>(r)] * st_.score(i, r).mean));
  set_heated_gaussian(st_.score(i, q), std::move(prec), eta, c);
}

void CaviEngine::noise_scale_impl(int j, double c) {
  auto& v = st_.noise[static_cast<std::size_t>(j)];
  if (v.fixed) return;
  const double rss = funfactor::expected_rss(data_, st_, stats_, eb_, eb2_, j);
  v.var.shape = c * (0.5 * static_cast<double>(data_.total_obs) + 0.5) + c - 1.0;
  require_positive_shape(v.var.shape);
  v.var.rate = c * (v.aux.mean_inv() + 0.5 * rss);
  tau_[j] = v.mean_inv();
}

void CaviEngine::noise_aux_impl(int j, double c) {
  auto& v = st_.noise[static_cast<std::size_t>(j)];
  if (v.fixed) return;
  v.aux.shape = 2.0 * c - 1.0;
  require_positive_shape(v.aux.shape);
  v.aux.rate = c * (v.var.mean_inv() + inv_a2_);
}

// Public single-block updates.

void CaviEngine::update_mean_coeffs(int j, double c) {
  ensure_score();
  mean_impl(j, c);
  weighted_valid_ = false;
}

void CaviEngine::update_loading_pair(int j, int q, double c) {
  if (st_.loadings_frozen) return;
  ensure_score();
  loading_impl(j, q, c);
  weighted_valid_ = false;
}

void CaviEngine::update_eigen_coeffs(int q, int l, double c) {
  ensure_weighted();
  eigen_impl(q, l, c);
  eigen_valid_ = false;
  score_valid_ = false;
}

void CaviEngine::update_scores(int i, int q, double c) {
  ensure_eigen();
  ensure_weighted();
  scores_impl(i, q, c);
  score_valid_ = false;
}

void CaviEngine::update_noise_scale(int j, double c) {
  ensure_score();
  noise_scale_impl(j, c);
  weighted_valid_ = false;
}

void CaviEngine::update_noise_aux(int j, double c) { noise_aux_impl(j, c); }

void CaviEngine::update_noise_variance(int j, double c) {
  update_noise_scale(j, c);
  update_noise_aux(j, c);
}

void CaviEngine::update_mean_smoothing_scale(int j, double c) {
  auto& v = st_.mean_smoothing[static_cast<std::size_t>(j)];
  if (v.fixed) return;
  const int kp = data_.num_penalized();
  v.var.shape = c * (0.5 * kp + 0.5) + c - 1.0;
  require_positive_shape(v.var.shape);
  v.var.rate = c * (v.aux.mean_inv() + 0.5 * penalized_energy(st_.mean_coef[static_cast<std::size_t>(j)]));
}

void CaviEngine::update_mean_smoothing_aux(int j, double c) {
  auto& v = st_.mean_smoothing[static_cast<std::size_t>(j)];
  if (v.fixed) return;
  v.aux.shape = 2.0 * c - 1.0;
  require_positive_shape(v.aux.shape);
  v.aux.rate = c * (v.var.mean_inv() + inv_a2_);
}

void CaviEngine::update_eigen_smoothing_scale(int q, int l, double c) {
  auto& v = st_.eigen_smooth(q, l);
  if (v.fixed) return;
  const int kp = data_.num_penalized();
  v.var.shape = c * (0.5 * kp + 0.5) + c - 1.0;
  require_positive_shape(v.var.shape);
  v.var.rate = c * (v.aux.mean_inv() + 0.5 * penalized_energy(st_.eigen(q, l)));
}

void CaviEngine::update_eigen_smoothing_aux(int q, int l, double c) {
  auto& v = st_.eigen_smooth(q, l);
  if (v.fixed) return;
  v.aux.shape = 2.0 * c - 1.0;
  require_positive_shape(v.aux.shape);
  v.aux.rate = c * (v.var.mean_inv() + inv_a2_);
}

void CaviEngine::update_smoothing_variances(double c) {
  for (int j = 0; j < st_.p; ++j) {
    update_mean_smoothing_scale(j, c);
    update_mean_smoothing_aux(j, c);
  }
  for (int q = 0; q < st_.Q; ++q)
    for (int l = 0; l < st_.L; ++l) {
      update_eigen_smoothing_scale(q, l, c);
      update_eigen_smoothing_aux(q, l, c);
    }
}

void CaviEngine::update_sparsity_weight(int q, double c) {
  double sum_gamma = 0.0;
  for (int j = 0; j < st_.p; ++j) sum_gamma += st_.loading(j, q).gamma;
  auto& w = st_.weights[static_cast<std::size_t>(q)];
  w.a = c * (c0_ + sum_gamma) - c + 1.0;
  w.b = c * (d0_ + st_.p - sum_gamma) - c + 1.0;
}

void CaviEngine::sweep(double c) {
  const int p = st_.p;
  const int Q = st_.Q;

  ensure_score();
  detail::parallel_for(p, threads_, [&](int j) { mean_impl(j, c); });
  weighted_valid_ = false;

  if (!st_.loadings_frozen && Q > 0) {
    detail::parallel_for(p, threads_, [&](int j) {
      for (int q = 0; q < Q; ++q) loading_impl(j, q, c);
    });
  }

  if (Q > 0) {
    ensure_weighted();
    for (int q = 0; q < Q; ++q)
      for (int l = 0; l < st_.L; ++l) eigen_impl(q, l, c);
    eigen_valid_ = false;
    score_valid_ = false;

    ensure_eigen();
    detail::parallel_for(data_.N, threads_, [&](int i) {
      for (int q = 0; q < Q; ++q) scores_impl(i, q, c);
    });
    score_valid_ = false;
  }

  ensure_score();
  detail::parallel_for(p, threads_, [&](int j) {
    noise_scale_impl(j, c);
    noise_aux_impl(j, c);
  });
  weighted_valid_ = false;

  update_smoothing_variances(c);
  for (int q = 0; q < Q; ++q) update_sparsity_weight(q, c);
}

}  // namespace funfactor

#include "funfactor/elbo.hpp"

#include <cmath>
#include <numbers>

#include "funfactor/updates.hpp"

namespace funfactor {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double gaussian_entropy(const GaussianFactor& g) {
  return 0.5 * (static_cast<double>(g.mean.size()) * (1.0 + kLog2Pi) + g.log_det);
}

/// E log N(nu | 0, blockdiag(sb2 I_2, sigma^2 I_K')).
double coef_prior(const GaussianFactor& g, double sigma_beta, const VariancePair& smooth) {
  const auto K = g.mean.size();
  const auto kp = static_cast<double>(K - 2);
  const double sb2 = sigma_beta * sigma_beta;
  const double head = g.mean.head(2).squaredNorm() + g.cov(0, 0) + g.cov(1, 1);
  const double tail = g.mean.tail(K - 2).squaredNorm() + g.cov.diagonal().tail(K - 2).sum();
  return -0.5 * (static_cast<double>(K) * kLog2Pi + 2.0 * std::log(sb2) + kp * smooth.mean_log() + head / sb2 +
                 smooth.mean_inv() * tail);
}

/// Prior terms of sigma^2 | a ~ IG(1/2, 1/a) and a ~ IG(1/2, 1/A^2), plus
/// the two entropies (added to `entropy`).
double variance_pair_prior(const VariancePair& v, double inv_a2, double& entropy) {
  if (v.fixed) return 0.0;
  const double lg_half = log_gamma(0.5);
  const double e_log_a = v.aux.mean_log();
  const double e_inv_a = v.aux.mean_inv();
  double out = -0.5 * e_log_a - lg_half - 1.5 * v.var.mean_log() - e_inv_a * v.var.mean_inv();
  out += 0.5 * std::log(inv_a2) - lg_half - 1.5 * e_log_a - inv_a2 * e_inv_a;
  entropy += v.var.entropy() + v.aux.entropy();
  return out;
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

ElboTerms compute_elbo_terms(const ModelData& data, const VariationalState& s, const Hyperparameters& hyper) {
  ElboTerms t;
  const double inv_a2 = 1.0 / (hyper.half_cauchy_scale * hyper.half_cauchy_scale);
  const FactorStats stats = compute_factor_stats(data, s, std::max(1, hyper.threads));
  const Eigen::MatrixXd eb = s.loading_means();
  const Eigen::MatrixXd eb2 = s.loading_second_moments();
  const auto n_tot = static_cast<double>(data.total_obs);

  for (int j = 0; j < s.p; ++j) {
    const auto& noise = s.noise[static_cast<std::size_t>(j)];
    const double rss = expected_rss(data, s, stats, eb, eb2, j);
    t.likelihood += -0.5 * (n_tot * (kLog2Pi + noise.mean_log()) + noise.mean_inv() * rss);
  }

  for (int j = 0; j < s.p; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    t.mean_coef += coef_prior(s.mean_coef[jj], hyper.sigma_beta, s.mean_smoothing[jj]);
    t.entropy += gaussian_entropy(s.mean_coef[jj]);
  }
  for (int q = 0; q < s.Q; ++q)
    for (int l = 0; l < s.L; ++l) {
      t.eigen_coef += coef_prior(s.eigen(q, l), hyper.sigma_beta, s.eigen_smooth(q, l));
      t.entropy += gaussian_entropy(s.eigen(q, l));
    }
  for (const auto& g : s.scores) {
    t.scores += -0.5 * (static_cast<double>(s.L) * kLog2Pi + g.cov.trace() + g.mean.squaredNorm());
    t.entropy += gaussian_entropy(g);
  }

  for (const auto& v : s.noise) t.variances += variance_pair_prior(v, inv_a2, t.entropy);
  for (const auto& v : s.mean_smoothing) t.variances += variance_pair_prior(v, inv_a2, t.entropy);
  for (const auto& v : s.eigen_smoothing) t.variances += variance_pair_prior(v, inv_a2, t.entropy);

  // Spike-and-slab: the slab's 2*pi normaliser cancels between prior and entropy.
  for (int j = 0; j < s.p; ++j)
    for (int q = 0; q < s.Q; ++q) {
      const auto& b = s.loading(j, q);
      const auto& w = s.weights[static_cast<std::size_t>(q)];
      t.loadings += b.gamma * w.mean_log() + (1.0 - b.gamma) * w.mean_log1m();
      if (b.gamma > 0.0) {
        t.loadings += -0.5 * b.gamma * (b.mu * b.mu + b.var);
        t.entropy += b.gamma * (0.5 + 0.5 * std::log(b.var));
      }
      t.entropy += -xlogx(b.gamma) - xlogx(1.0 - b.gamma);
    }

  const double c0 = hyper.omega.c0;
  const double d0 = hyper.omega.resolved_d0(s.p);
  for (const auto& w : s.weights) {
    t.weights += (c0 - 1.0) * w.mean_log() + (d0 - 1.0) * w.mean_log1m() - log_beta(c0, d0);
    t.entropy += log_beta(w.a, w.b) - (w.a - 1.0) * digamma(w.a) - (w.b - 1.0) * digamma(w.b) +
                 (w.a + w.b - 2.0) * digamma(w.a + w.b);
  }
  return t;
}

double compute_elbo(const ModelData& data, const VariationalState& state, const Hyperparameters& hyper, double c) {
  return compute_elbo_terms(data, state, hyper).heated(1.0 / c);
}

}  // namespace funfactor

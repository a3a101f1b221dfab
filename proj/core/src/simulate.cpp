#include "funfactor/simulate.hpp"

#include <cmath>
#include <numbers>

#include "funfactor/error.hpp"
#include "funfactor/splines.hpp"

namespace funfactor {

std::string to_string(MeanKind kind) { return kind == MeanKind::periodic ? "periodic" : "zero"; }

MeanKind mean_kind_from_string(const std::string& name) {
  if (name == "periodic") return MeanKind::periodic;
  if (name == "zero") return MeanKind::zero;
  throw Error(ErrorKind::ConfigError, "unknown mean kind '" + name + "'");
}

SimConfig preset_large_sparse() { return SimConfig{}; }

SimConfig preset_moderate_dense() {
  SimConfig c;
  c.N = 30;
  c.p = 100;
  c.Q = 2;
  c.L = 3;
  c.n_min = 2;
  c.n_max = 10;
  c.sparsity = SparsitySpec{false, 1.0, 1.0};
  c.mean_kind = MeanKind::zero;
  return c;
}

void validate(const SimConfig& c) {
  const auto fail = [](const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); };
  if (c.N < 2) fail("N must be at least 2");
  if (c.p < 1) fail("p must be positive");
  if (c.Q < 1) fail("Q must be positive");
  if (c.L < 1) fail("L must be positive");
  if (c.n_min < 1 || c.n_max < c.n_min) fail("n_range must satisfy 1 <= min <= max");
  if (!c.sparsity.dense && !(c.sparsity.a > 0.0 && c.sparsity.b > 0.0)) fail("Beta parameters must be positive");
  if (!(c.noise_sd >= 0.0)) fail("noise_sd must be non-negative");
  if (c.eigen_degrees.empty()) fail("eigen_degrees must be non-empty");
  for (int d : c.eigen_degrees)
    if (d < 1 || d > 5) fail("eigen degrees must lie in 1..5");
  if (c.eigen_interior_knots < 0) fail("eigen_interior_knots must be non-negative");
  if (c.grid_size < 2) fail("grid_size must be at least 2");
}

Eigen::MatrixXd EigenfunctionSet::evaluate(const Eigen::VectorXd& t) const {
  Eigen::MatrixXd raw(t.size(), size());
  for (int k = 0; k < size(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    raw.col(k) = bspline_basis(t, knot_vectors[ku], degrees[ku]) * coefficients[ku];
  }
  return raw * mixing.transpose();
}

EigenfunctionSet generate_eigenfunctions(int L, const std::vector<int>& degrees, int interior_knots, int grid_size,
                                         Rng& rng) {
  const Eigen::VectorXd grid = uniform_grid(grid_size);
  const Eigen::VectorXd w = trapezoid_weights(grid_size);
  Eigen::VectorXd interior(interior_knots);
  for (int k = 0; k < interior_knots; ++k) interior[k] = (k + 1.0) / (interior_knots + 1.0);

  for (int attempt = 0; attempt < 10; ++attempt) {
    EigenfunctionSet set;
    Eigen::MatrixXd raw(grid_size, L);
    for (int l = 0; l < L; ++l) {
      const int d = degrees[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(degrees.size()) - 1))];
      const Eigen::VectorXd knots = clamped_knot_vector(interior, d);
      const auto nb = knots.size() - d - 1;
      Eigen::VectorXd coef(nb);
      for (Eigen::Index k = 0; k < nb; ++k) coef[k] = rng.normal();
      raw.col(l) = bspline_basis(grid, knots, d) * coef;
      set.degrees.push_back(d);
      set.knot_vectors.push_back(knots);
      set.coefficients.push_back(coef);
    }
    // Modified Gram-Schmidt on the mixing matrix, twice for stability.
    Eigen::MatrixXd mix = Eigen::MatrixXd::Identity(L, L);
    Eigen::MatrixXd psi = raw;
    bool ok = true;
    for (int l = 0; l < L && ok; ++l) {
      const double before = std::sqrt(psi.col(l).dot(w.asDiagonal() * psi.col(l)));
      for (int pass = 0; pass < 2; ++pass)
        for (int k = 0; k < l; ++k) {
          const double proj = psi.col(k).dot(w.asDiagonal() * psi.col(l));
          psi.col(l) -= proj * psi.col(k);
          mix.row(l) -= proj * mix.row(k);
        }
      const double norm = std::sqrt(psi.col(l).dot(w.asDiagonal() * psi.col(l)));
      if (!(norm > 1e-8 * before) || !(norm > 0.0)) {
        ok = false;
        break;
      }
      psi.col(l) /= norm;
      mix.row(l) /= norm;
    }
    if (!ok) continue;
    set.mixing = mix;
    return set;
  }
  throw Error(ErrorKind::RankDeficiency, "eigenfunction draws were numerically dependent 10 times");
}

std::vector<EigenfunctionSet> generate_eigenfunctions(int Q, int L, const std::vector<int>& degrees,
                                                      int interior_knots, int grid_size, std::uint64_t seed) {
  Rng rng(seed, 0);
  std::vector<EigenfunctionSet> out;
  for (int q = 0; q < Q; ++q) out.push_back(generate_eigenfunctions(L, degrees, interior_knots, grid_size, rng));
  return out;
}

LoadingColumn draw_loading_column(int p, const SparsitySpec& sparsity, Rng& rng) {
  LoadingColumn col;
  col.support = Eigen::VectorXi::Zero(p);
  col.values = Eigen::VectorXd::Zero(p);
  if (sparsity.dense) {
    col.pi = 1.0;
    col.support.setOnes();
  } else {
    do {
      col.pi = rng.beta(sparsity.a, sparsity.b);
      for (int j = 0; j < p; ++j) col.support[j] = rng.bernoulli(col.pi) ? 1 : 0;
    } while (col.support.sum() == 0);
  }
  for (int j = 0; j < p; ++j)
    if (col.support[j]) col.values[j] = rng.normal();
  return col;
}

double SimTruth::mean_value(int j, double t) const {
  if (config.mean_kind == MeanKind::zero) return 0.0;
  return std::sin(2.0 * std::numbers::pi * t + phases[j]);
}

Eigen::VectorXd SimTruth::signal(int i, int j, const Eigen::VectorXd& t) const {
  Eigen::VectorXd y(t.size());
  for (Eigen::Index r = 0; r < t.size(); ++r) y[r] = mean_value(j, t[r]);
  for (int q = 0; q < config.Q; ++q) {
    if (loadings(j, q) == 0.0) continue;
    const auto qq = static_cast<std::size_t>(q);
    y += loadings(j, q) * (eigen_sets[qq].evaluate(t) * scores[qq].row(i).transpose());
  }
  return y;
}

Eigen::MatrixXd SimTruth::signal_matrix(int i, const Eigen::VectorXd& t) const {
  const auto n = t.size();
  Eigen::MatrixXd y(n, config.p);
  for (int j = 0; j < config.p; ++j)
    for (Eigen::Index r = 0; r < n; ++r) y(r, j) = mean_value(j, t[r]);
  Eigen::MatrixXd h(n, config.Q);
  for (int q = 0; q < config.Q; ++q) {
    const auto qq = static_cast<std::size_t>(q);
    h.col(q) = eigen_sets[qq].evaluate(t) * scores[qq].row(i).transpose();
  }
  y.noalias() += h * loadings.transpose();
  return y;
}

Eigen::MatrixXd SimTruth::factor_curves(int q) const {
  const auto qq = static_cast<std::size_t>(q);
  return scores[qq] * eigenfunctions[qq].transpose();
}

std::pair<LongitudinalDataset, SimTruth> generate_dataset(const SimConfig& cfg) {
  validate(cfg);
  SimTruth truth;
  truth.config = cfg;
  truth.grid = uniform_grid(cfg.grid_size);

  // Stream 0: eigenfunctions; 1: loadings; 2: mean phases; 3 + i: subject i.
  truth.eigen_sets =
      generate_eigenfunctions(cfg.Q, cfg.L, cfg.eigen_degrees, cfg.eigen_interior_knots, cfg.grid_size, cfg.seed);
  for (const auto& s : truth.eigen_sets) truth.eigenfunctions.push_back(s.evaluate(truth.grid));

  Rng load_rng(cfg.seed, 1);
  truth.inclusion_probs.resize(cfg.Q);
  truth.support.resize(cfg.p, cfg.Q);
  truth.loadings.resize(cfg.p, cfg.Q);
  for (int q = 0; q < cfg.Q; ++q) {
    auto col = draw_loading_column(cfg.p, cfg.sparsity, load_rng);
    truth.inclusion_probs[q] = col.pi;
    truth.support.col(q) = col.support;
    truth.loadings.col(q) = col.values;
  }

  Rng mean_rng(cfg.seed, 2);
  truth.phases = Eigen::VectorXd::Zero(cfg.p);
  if (cfg.mean_kind == MeanKind::periodic)
    for (int j = 0; j < cfg.p; ++j) truth.phases[j] = mean_rng.uniform(0.0, 2.0 * std::numbers::pi);
  truth.mean_functions.resize(cfg.grid_size, cfg.p);
  for (int j = 0; j < cfg.p; ++j)
    for (int g = 0; g < cfg.grid_size; ++g) truth.mean_functions(g, j) = truth.mean_value(j, truth.grid[g]);

  for (int q = 0; q < cfg.Q; ++q) truth.scores.emplace_back(cfg.N, cfg.L);
  LongitudinalDataset data;
  data.p = cfg.p;
  data.time_domain = std::make_pair(0.0, 1.0);
  data.variable_names.reserve(static_cast<std::size_t>(cfg.p));
  for (int j = 0; j < cfg.p; ++j) data.variable_names.push_back("v" + std::to_string(j + 1));
  data.subjects.resize(static_cast<std::size_t>(cfg.N));
  truth.times.resize(static_cast<std::size_t>(cfg.N));
  if (cfg.keep_noise) truth.noise.resize(static_cast<std::size_t>(cfg.N));
  for (int i = 0; i < cfg.N; ++i) {
    Rng rng(cfg.seed, 3 + static_cast<std::uint64_t>(i));
    const auto n = static_cast<int>(rng.uniform_int(cfg.n_min, cfg.n_max));
    Eigen::VectorXd t(n);
    for (int r = 0; r < n; ++r) t[r] = rng.uniform();
    for (int q = 0; q < cfg.Q; ++q)
      for (int l = 0; l < cfg.L; ++l) truth.scores[static_cast<std::size_t>(q)](i, l) = rng.normal() / (l + 1.0);
    Eigen::MatrixXd eps(n, cfg.p);
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < cfg.p; ++j) eps(r, j) = cfg.noise_sd * rng.normal();
    auto& subj = data.subjects[static_cast<std::size_t>(i)];
    subj.subject_id = "s" + std::to_string(i + 1);
    subj.times = t;
    truth.times[static_cast<std::size_t>(i)] = t;
    subj.values = truth.signal_matrix(i, t) + eps;
    if (cfg.keep_noise) truth.noise[static_cast<std::size_t>(i)] = std::move(eps);
  }
  return {std::move(data), std::move(truth)};
}

}  // namespace funfactor

#include <doctest.h>

#include <cmath>

#include "funfactor/simulate.hpp"
#include "funfactor/splines.hpp"

using namespace funfactor;

TEST_CASE("presets") {
  const auto a = preset_large_sparse();
  CHECK(a.N == 100);
  CHECK(a.p == 20000);
  CHECK(a.Q == 3);
  CHECK(a.L == 2);
  CHECK(a.n_min == 5);
  CHECK(a.n_max == 10);
  CHECK(!a.sparsity.dense);
  CHECK(a.sparsity.a == 1.0);
  CHECK(a.sparsity.b == 10.0);

  const auto b = preset_moderate_dense();
  CHECK(b.N == 30);
  CHECK(b.p == 100);
  CHECK(b.Q == 2);
  CHECK(b.L == 3);
  CHECK(b.n_min == 2);
  CHECK(b.n_max == 10);
  CHECK(!b.sparsity.dense);
  CHECK(b.sparsity.a == 1.0);
  CHECK(b.sparsity.b == 1.0);
  CHECK(b.mean_kind == MeanKind::zero);
}

TEST_CASE("simulated eigenfunctions are orthonormal and well behaved") {
  const auto sets = generate_eigenfunctions(3, 3, {2, 3}, 4, 100, 17);
  REQUIRE(sets.size() == 3);
  const auto grid = uniform_grid(100);
  const Eigen::VectorXd w = trapezoid_weights(100);
  for (const auto& s : sets) {
    const Eigen::MatrixXd f = s.evaluate(grid);
    CHECK(f.allFinite());
    const Eigen::MatrixXd gram = f.transpose() * w.asDiagonal() * f;
    CHECK((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(f.cwiseAbs().maxCoeff() < 50.0);
    // Continuity: neighbouring grid values on a 10x finer grid stay close.
    const Eigen::MatrixXd fine = s.evaluate(uniform_grid(1000));
    const Eigen::MatrixXd jumps = fine.bottomRows(999) - fine.topRows(999);
    CHECK(jumps.cwiseAbs().maxCoeff() < 0.5);
  }
  const auto again = generate_eigenfunctions(3, 3, {2, 3}, 4, 100, 17);
  for (std::size_t q = 0; q < 3; ++q) CHECK((again[q].evaluate(grid) - sets[q].evaluate(grid)).norm() == 0.0);
}

TEST_CASE("same configuration gives the same dataset") {
  auto cfg = preset_large_sparse();
  cfg.p = 50;
  cfg.seed = 4;
  const auto [d1, t1] = generate_dataset(cfg);
  const auto [d2, t2] = generate_dataset(cfg);
  REQUIRE(d1.subjects.size() == d2.subjects.size());
  for (std::size_t i = 0; i < d1.subjects.size(); ++i) {
    CHECK((d1.subjects[i].times - d2.subjects[i].times).norm() == 0.0);
    CHECK((d1.subjects[i].values - d2.subjects[i].values).norm() == 0.0);
  }
  CHECK((t1.loadings - t2.loadings).norm() == 0.0);
  cfg.seed = 5;
  const auto [d3, t3] = generate_dataset(cfg);
  CHECK((d3.subjects[0].values.row(0) - d1.subjects[0].values.row(0)).norm() > 0.0);
}

TEST_CASE("loading supports") {
  auto cfg = preset_large_sparse();
  cfg.p = 30;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    cfg.seed = seed;
    const auto truth = generate_dataset(cfg).second;
    for (int q = 0; q < cfg.Q; ++q) CHECK(truth.support.col(q).sum() >= 1);
    for (int j = 0; j < cfg.p; ++j)
      for (int q = 0; q < cfg.Q; ++q) CHECK((truth.support(j, q) != 0) == (truth.loadings(j, q) != 0.0));
  }
  auto dense = preset_moderate_dense();
  dense.sparsity.dense = true;
  dense.seed = 3;
  const auto truth = generate_dataset(dense).second;
  CHECK(truth.support.minCoeff() == 1);
  CHECK((truth.loadings.array() != 0.0).all());
}

TEST_CASE("observations reassemble from the stored truth") {
  auto cfg = preset_large_sparse();
  cfg.p = 25;
  cfg.N = 15;
  cfg.keep_noise = true;
  cfg.seed = 8;
  const auto [data, truth] = generate_dataset(cfg);
  REQUIRE(truth.noise.size() == data.subjects.size());
  for (int i = 0; i < cfg.N; ++i) {
    const auto& s = data.subjects[static_cast<std::size_t>(i)];
    CHECK(s.times.size() >= cfg.n_min);
    CHECK(s.times.size() <= cfg.n_max);
    CHECK(s.times.minCoeff() >= 0.0);
    CHECK(s.times.maxCoeff() <= 1.0);
    const Eigen::MatrixXd rebuilt = truth.signal_matrix(i, s.times) + truth.noise[static_cast<std::size_t>(i)];
    CHECK((rebuilt - s.values).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("periodic means are unit-amplitude phase-shifted sines") {
  auto cfg = preset_large_sparse();
  cfg.p = 4;
  const auto truth = generate_dataset(cfg).second;
  for (int j = 0; j < 4; ++j) {
    CHECK(truth.phases[j] >= 0.0);
    CHECK(truth.phases[j] < 2.0 * M_PI);
    CHECK(truth.mean_value(j, 0.3) == doctest::Approx(std::sin(2.0 * M_PI * 0.3 + truth.phases[j])));
  }
  auto zero = preset_moderate_dense();
  CHECK(generate_dataset(zero).second.mean_functions.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("score variances decay as 1/l^2") {
  auto cfg = preset_large_sparse();
  cfg.p = 2;
  cfg.Q = 1;
  cfg.L = 3;
  cfg.N = 100000;
  cfg.n_min = 1;
  cfg.n_max = 1;
  const auto truth = generate_dataset(cfg).second;
  const Eigen::MatrixXd& z = truth.scores[0];
  for (int l = 0; l < 3; ++l) {
    const double target = 1.0 / ((l + 1.0) * (l + 1.0));
    const Eigen::ArrayXd sq = z.col(l).array().square();
    const double var = sq.mean();
    const double se = std::sqrt((sq - var).square().sum() / (sq.size() - 1.0) / sq.size());
    INFO("l=" << l + 1 << " var " << var << " se " << se);
    CHECK(std::abs(var - target) < 3.0 * se);
  }
}

TEST_CASE("Beta(1,10) supports cover about one variable in eleven") {
  Rng rng(99, 0);
  SparsitySpec s;
  const int draws = 10000;
  const int p = 2000;
  double sum = 0.0, sum2 = 0.0;
  for (int d = 0; d < draws; ++d) {
    const auto col = draw_loading_column(p, s, rng);
    const double frac = col.support.cast<double>().mean();
    sum += frac;
    sum2 += frac * frac;
  }
  const double mean = sum / draws;
  const double se = std::sqrt((sum2 / draws - mean * mean) / draws);
  INFO("mean " << mean << " se " << se);
  // Redrawing empty supports inflates the mean by a factor 1/(1 - P(empty)); P(empty) = 10/(p+10) here.
  CHECK(std::abs(mean - 1.0 / 11.0) < 3.0 * se);
}

#include <doctest.h>

#include <cmath>

#include "funfactor/error.hpp"
#include "funfactor/fit.hpp"
#include "funfactor/model_data.hpp"
#include "funfactor/postprocess.hpp"
#include "funfactor/simulate.hpp"
#include "funfactor/updates.hpp"

using namespace funfactor;

namespace {

struct SmallFit {
  LongitudinalDataset data;
  ModelData md;
  Hyperparameters hyper;
  FitOutput out;
};

const SmallFit& small_fit() {
  static const SmallFit f = [] {
    SmallFit s;
    auto cfg = preset_moderate_dense();
    cfg.N = 20;
    cfg.p = 12;
    cfg.seed = 31;
    s.data = validate_dataset(generate_dataset(cfg).first);
    s.md = build_model_data(s.data);
    s.hyper.q_max = 3;
    s.hyper.l_max = 3;
    s.hyper.schedule.levels = 20;
    s.hyper.max_iter = 200;
    s.out = fit(s.md, s.hyper);
    return s;
  }();
  return f;
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& f) {
  const Eigen::VectorXd w = trapezoid_weights(static_cast<int>(f.rows()));
  return f.transpose() * w.asDiagonal() * f;
}

// Curves with a known decomposition: orthonormal functions and independent scores.
Eigen::MatrixXd known_curves(const Eigen::VectorXd& sd, int N, int G, Eigen::MatrixXd* basis_out = nullptr) {
  const Eigen::VectorXd t = uniform_grid(G);
  const int L = static_cast<int>(sd.size());
  Eigen::MatrixXd psi(G, L);
  for (int l = 0; l < L; ++l) psi.col(l) = (std::sqrt(2.0) * (M_PI * (l + 1) * t.array()).cos()).matrix();
  // Re-orthonormalise under the trapezoid rule so the fixed point is exact.
  const Eigen::VectorXd w = trapezoid_weights(G);
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < l; ++k) psi.col(l) -= w.dot(psi.col(l).cwiseProduct(psi.col(k))) * psi.col(k);
    psi.col(l) /= std::sqrt(w.dot(psi.col(l).cwiseAbs2()));
  }
  // Scores with exactly uncorrelated columns of the requested second moments.
  Rng rng(3, 1);
  Eigen::MatrixXd z(N, L);
  for (int i = 0; i < N; ++i)
    for (int l = 0; l < L; ++l) z(i, l) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
  const Eigen::MatrixXd qz = qr.householderQ() * Eigen::MatrixXd::Identity(N, L);
  const Eigen::MatrixXd scores = std::sqrt(static_cast<double>(N)) * qz * sd.asDiagonal();
  if (basis_out) *basis_out = psi;
  return scores * psi.transpose();
}

}  // namespace

TEST_CASE("orthonormal input with uncorrelated scores is a fixed point") {
  Eigen::VectorXd sd(2);
  sd << 2.0, 1.0;
  Eigen::MatrixXd psi;
  const auto curves = known_curves(sd, 40, 101, &psi);
  const auto out = orthonormalize(curves, 2);
  CHECK(out.eigenvalues[0] == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(out.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-10));
  for (int l = 0; l < 2; ++l) {
    const double s = out.eigenfunctions.col(l).dot(psi.col(l)) > 0 ? 1.0 : -1.0;
    CHECK((out.eigenfunctions.col(l) - s * psi.col(l)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("joint mixing of scores and eigenfunctions leaves the decomposition unchanged") {
  Eigen::VectorXd sd(3);
  sd << 1.0, 0.5, 1.0 / 3.0;
  const auto curves = known_curves(sd, 30, 80);
  const auto base = orthonormalize(curves, 3);
  Rng rng(5, 2);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd m(3, 3);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) m(a, b) = rng.normal();
    // scores * M and eigenfunctions * M^{-T} describe the same curves.
    const Eigen::MatrixXd scores = base.scores * m;
    const Eigen::MatrixXd funcs = base.eigenfunctions * m.inverse().transpose();
    const auto again = orthonormalize(scores * funcs.transpose(), 3);
    CHECK((again.eigenvalues - base.eigenvalues).cwiseAbs().maxCoeff() < 1e-9 * base.eigenvalues[0]);
    for (int l = 0; l < 3; ++l) {
      const double s = again.eigenfunctions.col(l).dot(base.eigenfunctions.col(l)) > 0 ? 1.0 : -1.0;
      CHECK((again.eigenfunctions.col(l) - s * base.eigenfunctions.col(l)).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("sign convention makes each eigenfunction integrate to a non-negative value") {
  Eigen::VectorXd sd(2);
  sd << 1.0, 0.7;
  const auto out = orthonormalize(-known_curves(sd, 25, 64), 2);
  const Eigen::VectorXd w = trapezoid_weights(64);
  for (int l = 0; l < 2; ++l) CHECK(w.dot(out.eigenfunctions.col(l)) >= 0.0);
}

TEST_CASE("proportion of variance explained and component selection") {
  Eigen::VectorXd e(5);
  e << 3, 1, 0, 0, 0;
  const auto pve = compute_pve(e);
  CHECK(pve[0] == 0.75);
  CHECK(pve[1] == 0.25);
  CHECK(pve.tail(3).cwiseAbs().maxCoeff() == 0.0);
  CHECK(select_components(pve, 0.99) == 2);

  e << 2, 0, 0, 0, 0;
  CHECK(compute_pve(e)[0] == 1.0);
  CHECK(select_components(compute_pve(e), 0.99) == 1);

  Eigen::VectorXd p(5);
  p << 0.5, 0.3, 0.15, 0.04, 0.01;
  CHECK(select_components(p, 0.99) == 4);
  int prev = 0;
  for (double th : {0.1, 0.5, 0.8, 0.95, 0.99, 1.0}) {
    const int k = select_components(p, th);
    CHECK(k >= prev);
    prev = k;
  }
  CHECK_THROWS_AS(compute_pve(Eigen::VectorXd::Zero(3)), Error);
}

TEST_CASE("factor inclusion probabilities") {
  VariationalState st;
  st.p = 1000;
  st.Q = 3;
  st.loadings.assign(3000, SpikeSlabFactor{0.0, 0.0, 1.0});
  st.loading(0, 0).gamma = 0.9;
  st.loading(1, 0).gamma = 0.9;
  for (int j = 0; j < 1000; ++j) st.loading(j, 2).gamma = 0.001;
  const auto ppi = factor_inclusion_probabilities(st);
  CHECK(ppi[0] == doctest::Approx(0.99).epsilon(1e-12));
  CHECK(ppi[1] == 0.0);
  CHECK(ppi[2] == doctest::Approx(1.0 - std::pow(0.999, 1000)).epsilon(1e-12));
  CHECK(ppi[2] == doctest::Approx(0.632).epsilon(1e-3));
  CHECK(select_factors(st) == std::vector<int>{0, 2});

  // Permuting variables permutes nothing in the factor-level values.
  VariationalState perm = st;
  for (int j = 0; j < 1000; ++j)
    for (int q = 0; q < 3; ++q) perm.loading(j, q) = st.loading(999 - j, q);
  CHECK((factor_inclusion_probabilities(perm) - ppi).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("summaries of a fitted model") {
  const auto& f = small_fit();
  const auto grid = uniform_grid(f.hyper.dense_grid_size);
  const auto res = summarize_fit(f.out.state, f.md.basis, f.hyper, f.out.trace, f.out.status);
  REQUIRE(!res.retained.empty());
  for (const auto& fr : res.factors) {
    if (fr.degenerate) continue;
    const auto gram = weighted_gram(fr.eigenfunctions);
    CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-6);
    for (Eigen::Index l = 1; l < fr.eigenvalues.size(); ++l) CHECK(fr.eigenvalues[l] <= fr.eigenvalues[l - 1]);
    CHECK(std::abs(fr.pve.sum() - 1.0) < 1e-10);
    // The rotated representation reproduces the factor trajectories on the grid.
    const Eigen::MatrixXd before = factor_curves(f.out.state, f.md.basis, fr.factor, grid);
    const Eigen::MatrixXd after = fr.scores * fr.eigenfunctions.transpose();
    CHECK((before - after).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, before.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("bands collapse onto the mean when every variance is zero") {
  const auto& f = small_fit();
  VariationalState st = f.out.state;
  for (auto& g : st.mean_coef) g.cov.setZero();
  for (auto& g : st.eigen_coef) g.cov.setZero();
  for (auto& g : st.scores) g.cov.setZero();
  for (auto& b : st.loadings) b = SpikeSlabFactor{1.0, b.mean(), 0.0};
  for (auto& n : st.noise) n.fixed = 0.0;
  const auto grid = uniform_grid(50);
  const auto bands = predict_trajectory_bands(st, f.md.basis, 2, 3, grid, 0.95, 200, 4);
  const double scale = std::max(1.0, bands.mean.cwiseAbs().maxCoeff());
  CHECK((bands.lower - bands.mean).cwiseAbs().maxCoeff() < 1e-10 * scale);
  CHECK((bands.upper - bands.mean).cwiseAbs().maxCoeff() < 1e-10 * scale);
}

TEST_CASE("band width is stable as the number of draws grows") {
  const auto& f = small_fit();
  const auto grid = uniform_grid(100);
  double change = 0.0;
  int count = 0;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) {
      const auto a = predict_trajectory_bands(f.out.state, f.md.basis, j, i, grid, 0.95, 500, 11);
      const auto b = predict_trajectory_bands(f.out.state, f.md.basis, j, i, grid, 0.95, 2000, 12);
      const double wa = (a.upper - a.lower).mean(), wb = (b.upper - b.lower).mean();
      change += std::abs(wa - wb) / wb;
      ++count;
      CHECK((a.lower.array() <= a.upper.array()).all());
      CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() == 0.0);
    }
  CHECK(change / count < 0.02);
}

TEST_CASE("all-subject bands match the single-subject sampler in shape and ordering") {
  const auto& f = small_fit();
  const auto grid = uniform_grid(30);
  int visited = 0;
  predict_all_bands(f.out.state, f.md.basis, grid, 0.9, 100, 3,
                    [&](int, const Eigen::MatrixXd& mean, const Eigen::MatrixXd& lo, const Eigen::MatrixXd& hi) {
                      ++visited;
                      CHECK(mean.rows() == lo.rows());
                      CHECK(mean.cols() == lo.cols());
                      CHECK((lo.array() <= hi.array()).all());
                    });
  CHECK(visited == f.out.state.p);
}

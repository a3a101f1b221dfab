#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "funfactor/error.hpp"
#include "funfactor/metrics.hpp"

using namespace funfactor;

namespace {

double brute_force_cost(const Eigen::MatrixXd& cost, std::vector<int>* best_perm) {
  const auto n = cost.rows(), m = cost.cols();
  std::vector<int> cols(static_cast<std::size_t>(m));
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) c += cost(r, cols[static_cast<std::size_t>(r)]);
    if (c < best) {
      best = c;
      if (best_perm) best_perm->assign(cols.begin(), cols.begin() + n);
    }
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

Eigen::VectorXi ivec(std::initializer_list<int> v) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

FitResult fit_from_truth(const SimTruth& truth) {
  FitResult f;
  f.grid = truth.grid;
  for (int q = 0; q < truth.config.Q; ++q) {
    FactorResult fr;
    fr.factor = q;
    fr.retained = true;
    fr.scores = truth.scores[static_cast<std::size_t>(q)];
    fr.eigenfunctions = truth.eigenfunctions[static_cast<std::size_t>(q)];
    fr.num_components = truth.config.L;
    f.factors.push_back(fr);
    f.retained.push_back(q);
  }
  return f;
}

}  // namespace

TEST_CASE("Hungarian assignment matches brute force") {
  Rng rng(12, 0);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 5));
    const int m = static_cast<int>(rng.uniform_int(n, 6));
    Eigen::MatrixXd cost(n, m);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < m; ++c) cost(r, c) = trial % 3 == 0 ? std::floor(4.0 * rng.uniform()) : rng.uniform();
    const auto assign = hungarian(cost);
    REQUIRE(assign.size() == static_cast<std::size_t>(n));
    double total = 0.0;
    std::vector<int> used;
    for (int r = 0; r < n; ++r) {
      total += cost(r, assign[static_cast<std::size_t>(r)]);
      used.push_back(assign[static_cast<std::size_t>(r)]);
    }
    std::sort(used.begin(), used.end());
    CHECK(std::adjacent_find(used.begin(), used.end()) == used.end());
    CHECK(total == doctest::Approx(brute_force_cost(cost, nullptr)).epsilon(1e-12));
  }
}

TEST_CASE("ROC AUC") {
  CHECK(roc_auc(vec({0.9, 0.8, 0.1, 0.2}), ivec({1, 1, 0, 0})) == 1.0);
  CHECK(roc_auc(vec({0.1, 0.2, 0.9, 0.8}), ivec({1, 1, 0, 0})) == 0.0);
  CHECK(roc_auc(vec({0.5, 0.5, 0.5, 0.5}), ivec({1, 0, 1, 0})) == 0.5);
  // One positive beats one of two negatives and ties the other.
  CHECK(roc_auc(vec({0.4, 0.4, 0.1}), ivec({1, 0, 0})) == 0.75);
  CHECK_THROWS_AS(roc_auc(vec({0.1, 0.2}), ivec({1, 1})), Error);

  Rng rng(3, 3);
  Eigen::VectorXd s(50);
  Eigen::VectorXi lab(50);
  for (int k = 0; k < 50; ++k) {
    lab[k] = k % 3 == 0;
    s[k] = std::round(10.0 * (rng.uniform() + 0.3 * lab[k])) / 10.0;
  }
  const double base = roc_auc(s, lab);
  const Eigen::VectorXd transformed = (s.array() * 3.0).exp() + 2.0;
  CHECK(roc_auc(transformed, lab) == base);
  CHECK(roc_auc(-s, lab) == doctest::Approx(1.0 - base));
}

TEST_CASE("integrated squared error") {
  const int G = 1001;
  const auto t = uniform_grid(G);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(G);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(G);
  const Eigen::VectorXd s = (2.0 * M_PI * t.array()).sin().matrix();
  CHECK(integrated_squared_error(s, s) == 0.0);
  CHECK(integrated_squared_error(zero, one) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(integrated_squared_error(s, zero) - 0.5) < 1e-6);
  const Eigen::VectorXd c = t.array().square().matrix();
  const double e = integrated_squared_error(s, c);
  CHECK(integrated_squared_error(c, s) == e);
  CHECK(integrated_squared_error(3.0 * s, 3.0 * c) == doctest::Approx(9.0 * e).epsilon(1e-13));
  CHECK_THROWS_AS(integrated_squared_error(s, Eigen::VectorXd::Zero(10)), Error);
}

TEST_CASE("truth aligned to itself is the identity") {
  auto cfg = preset_moderate_dense();
  cfg.seed = 6;
  const auto truth = generate_dataset(cfg).second;
  const auto est = fit_from_truth(truth);
  const auto map = align_components(est, truth);
  CHECK(map.misses == 0);
  for (int q = 0; q < cfg.Q; ++q) {
    CHECK(map.factor[static_cast<std::size_t>(q)] == q);
    for (int l = 0; l < cfg.L; ++l) {
      CHECK(map.component[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)] == l);
      CHECK(map.sign[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)] == 1);
    }
  }
}

TEST_CASE("swapped factors and a negated component are recovered") {
  auto cfg = preset_moderate_dense();
  cfg.seed = 7;
  const auto truth = generate_dataset(cfg).second;
  auto est = fit_from_truth(truth);
  std::swap(est.factors[0], est.factors[1]);
  est.factors[0].factor = 0;
  est.factors[1].factor = 1;
  // Truth factor 1 now lives in estimated slot 0; negate its first component.
  est.factors[0].scores.col(0) *= -1.0;
  est.factors[0].eigenfunctions.col(0) *= -1.0;
  const auto map = align_components(est, truth);
  CHECK(map.factor[0] == 1);
  CHECK(map.factor[1] == 0);
  CHECK(map.sign[1][0] == -1);
  CHECK(map.sign[1][1] == 1);
  CHECK(map.sign[0][0] == 1);
  CHECK(map.misses == 0);
}

TEST_CASE("alignment undoes a random rotation within a factor better than no alignment") {
  auto cfg = preset_moderate_dense();
  cfg.seed = 9;
  cfg.N = 200;
  const auto truth = generate_dataset(cfg).second;
  auto est = fit_from_truth(truth);
  Rng rng(1, 1);
  for (auto& f : est.factors) {
    Eigen::MatrixXd m(cfg.L, cfg.L);
    for (int a = 0; a < cfg.L; ++a)
      for (int b = 0; b < cfg.L; ++b) m(a, b) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    const Eigen::MatrixXd rot = qr.householderQ();
    // Mostly a permutation with small mixing.
    Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(cfg.L, cfg.L);
    for (int l = 0; l < cfg.L; ++l) perm((l + 1) % cfg.L, l) = l == 0 ? -1.0 : 1.0;
    const Eigen::MatrixXd mix = (perm + 0.2 * rot).householderQr().householderQ();
    f.scores = f.scores * mix;
    f.eigenfunctions = f.eigenfunctions * mix;
  }
  const auto map = align_components(est, truth);
  double pre = 0.0, post = 0.0;
  int n = 0;
  for (int q = 0; q < cfg.Q; ++q)
    for (int l = 0; l < cfg.L; ++l) {
      const auto& tq = truth.scores[static_cast<std::size_t>(q)];
      pre += std::abs(correlation(tq.col(l), est.factors[static_cast<std::size_t>(q)].scores.col(l)));
      post += map.correlation[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)];
      ++n;
    }
  CHECK(post / n > pre / n);
}

TEST_CASE("loading AUC uses the aligned factor columns") {
  Eigen::MatrixXi support(4, 2);
  support << 1, 0, 1, 1, 0, 0, 0, 1;
  Eigen::MatrixXd gamma(4, 2);
  // Estimated factors are stored in swapped order.
  gamma << 0.1, 0.9, 0.8, 0.7, 0.2, 0.3, 0.6, 0.05;
  AlignmentMap map;
  map.factor = {1, 0};
  CHECK(loading_auc_factor(gamma, support, map, 0) == 1.0);
  CHECK(loading_auc_factor(gamma, support, map, 1) == 1.0);
  CHECK(loading_auc(gamma, support, map) == 1.0);
  CHECK(loading_auc(gamma, support, AlignmentMap{{0, 1}}) == doctest::Approx(6.0 / 16.0));
  map.factor = {1, -1};
  CHECK(std::isfinite(loading_auc(gamma, support, map)));
  Eigen::MatrixXi all_on = Eigen::MatrixXi::Ones(4, 2);
  CHECK(std::isnan(loading_auc_factor(gamma, all_on, map, 0)));
}

TEST_CASE("band coverage and width") {
  Rng rng(4, 0);
  const Eigen::MatrixXd signal = Eigen::MatrixXd::Random(40, 3);
  const double inf = std::numeric_limits<double>::infinity();
  for (auto target : {CoverageTarget::empirical, CoverageTarget::analytic, CoverageTarget::signal}) {
    const auto wide = band_coverage_width(Eigen::MatrixXd::Constant(40, 3, -inf), Eigen::MatrixXd::Constant(40, 3, inf),
                                          signal, 1.0, target, rng);
    CHECK(wide.coverage == 100.0);
    CHECK(wide.points == 120);
  }
  const auto thin = band_coverage_width(signal, signal, signal, 1.0, CoverageTarget::empirical, rng);
  CHECK(thin.coverage == 0.0);
  CHECK(thin.width == 0.0);
  const auto thin_a = band_coverage_width(signal, signal, signal, 1.0, CoverageTarget::analytic, rng);
  CHECK(thin_a.coverage == 0.0);

  // Analytic coverage of +-1.96 sd bands around the signal is the normal 95%.
  const auto exact = band_coverage_width(signal.array() - 1.959963984540054, signal.array() + 1.959963984540054,
                                         signal, 1.0, CoverageTarget::analytic, rng);
  CHECK(exact.coverage == doctest::Approx(95.0).epsilon(1e-9));
  CHECK(exact.width == doctest::Approx(2.0 * 1.959963984540054));

  double prev = -1.0;
  for (double h : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    const auto r = band_coverage_width(signal.array() - h, signal.array() + h, signal, 1.0, CoverageTarget::analytic, rng);
    CHECK(r.coverage >= prev);
    prev = r.coverage;
  }
}

TEST_CASE("replicate aggregation") {
  auto rep = aggregate_replicates({{{"x", 1.0}}, {{"x", 1.0}}, {{"x", 1.0}}});
  CHECK(rep.summary["x"].mean == 1.0);
  CHECK(rep.summary["x"].se == 0.0);
  rep = aggregate_replicates({{{"x", 0.0}}, {{"x", 1.0}}});
  CHECK(rep.summary["x"].mean == 0.5);
  CHECK(rep.summary["x"].se == doctest::Approx(0.5));
  rep = aggregate_replicates({{{"x", 2.0}, {"y", std::nan("")}}});
  CHECK(rep.summary["x"].count == 1);
  CHECK(std::isnan(rep.summary["x"].se));
  CHECK(rep.summary["y"].count == 0);
  CHECK_THROWS_AS(aggregate_replicates({}), Error);
  CHECK(!format_table(aggregate_replicates({{{"auc", 0.9}}, {{"auc", 0.95}}}), "test").empty());
}

TEST_CASE("coverage target names round trip") {
  for (auto t : {CoverageTarget::empirical, CoverageTarget::analytic, CoverageTarget::signal})
    CHECK(coverage_target_from_string(to_string(t)) == t);
  CHECK_THROWS(coverage_target_from_string("bogus"));
}

#include <doctest.h>

#include <cmath>
#include <vector>

#include "funfactor/error.hpp"
#include "funfactor/rng.hpp"
#include "funfactor/splines.hpp"

using namespace funfactor;

namespace {

// Piecewise Simpson on each knot span; f'' of a cubic spline is linear there, so f''^2 is integrated exactly.
double roughness_by_quadrature(const SplineBasis& basis, const Eigen::VectorXd& raw_coef) {
  std::vector<double> breaks{0.0};
  for (Eigen::Index k = 0; k < basis.interior_knots.size(); ++k) breaks.push_back(basis.interior_knots[k]);
  breaks.push_back(1.0);
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s], b = breaks[s + 1];
    Eigen::VectorXd x(3);
    // Nudge the end points inward so each evaluation stays on this span.
    const double eps = 1e-13 * (b - a);
    x << a + eps, 0.5 * (a + b), b - eps;
    const Eigen::VectorXd f2 = bspline_basis(x, basis.knot_vector, basis.degree, 2) * raw_coef;
    total += (b - a) / 6.0 * (f2[0] * f2[0] + 4.0 * f2[1] * f2[1] + f2[2] * f2[2]);
  }
  return total;
}

Eigen::VectorXd greville(const SplineBasis& basis) {
  const int m = basis.num_columns();
  Eigen::VectorXd g(m);
  for (int k = 0; k < m; ++k) g[k] = basis.knot_vector.segment(k + 1, basis.degree).mean();
  return g;
}

}  // namespace

TEST_CASE("number of penalized basis functions") {
  CHECK(choose_num_basis(100) == 25);
  CHECK(choose_num_basis(12) == 7);
  CHECK(choose_num_basis(400) == 40);
  CHECK(choose_num_basis(1) == 7);
  CHECK(choose_num_basis(163) == 40);
  CHECK(choose_num_basis(159) == 39);
  CHECK_THROWS_AS(choose_num_basis(0), Error);
}

TEST_CASE("knots sit at quantiles of the pooled distinct times") {
  std::vector<double> t;
  for (int k = 0; k <= 600; ++k) t.push_back(k / 600.0);
  const auto knots = place_knots(t, 7);
  REQUIRE(knots.size() == 5);
  for (int k = 0; k < 5; ++k) CHECK(knots[k] == doctest::Approx((k + 1) / 6.0).epsilon(1e-12));

  SUBCASE("duplicated times do not shift the quantiles") {
    auto doubled = t;
    doubled.insert(doubled.end(), t.begin(), t.begin() + 100);
    const auto again = place_knots(doubled, 7);
    CHECK((again - knots).norm() == 0.0);
  }
}

TEST_CASE("knot placement with heavy ties stays strictly increasing inside (0,1)") {
  const std::vector<double> t{0.0, 0.5, 1.0};
  for (int kp : {7, 12, 40}) {
    const auto knots = place_knots(t, kp);
    REQUIRE(knots.size() == kp - 2);
    CHECK(knots[0] > 0.0);
    CHECK(knots[kp - 3] < 1.0);
    for (int k = 1; k < kp - 2; ++k) CHECK(knots[k] > knots[k - 1]);
  }
}

TEST_CASE("knot placement preconditions") {
  const std::vector<double> same{0.3, 0.3, 0.3};
  try {
    place_knots(same, 7);
    FAIL("expected DegenerateTimes");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateTimes);
  }
  const std::vector<double> ok{0.1, 0.9};
  CHECK_THROWS_AS(place_knots(ok, 6), Error);
}

TEST_CASE("B-spline basis is a partition of unity") {
  const auto basis = make_spline_basis(place_knots(std::vector<double>{0.0, 0.2, 0.35, 0.9, 1.0}, 9));
  const Eigen::VectorXd x = uniform_grid(257);
  const Eigen::MatrixXd b = bspline_basis(x, basis.knot_vector, basis.degree);
  CHECK(b.cols() == 11);
  CHECK((b.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(b.minCoeff() >= 0.0);
}

TEST_CASE("design layout") {
  const auto basis = make_spline_basis_for_times(std::vector<double>{0.0, 0.25, 0.5, 1.0}, 7);
  Eigen::VectorXd t(2);
  t << 0.5, 0.0;
  const auto c = build_design(t, basis);
  CHECK(c.cols() == 9);
  CHECK(c(0, 0) == 1.0);
  CHECK(c(0, 1) == 0.5);
  CHECK(c(1, 0) == 1.0);
  CHECK(c(1, 1) == 0.0);

  for (int kp : {7, 10, 23, 40}) {
    std::vector<double> u;
    for (int k = 0; k < 100; ++k) u.push_back((k + 0.5) / 100.0);
    const auto b = make_spline_basis_for_times(u, kp);
    CHECK(build_design(uniform_grid(11), b).cols() == kp + 2);
  }
}

TEST_CASE("affine functions are reproduced by the unpenalized block") {
  const auto basis = make_spline_basis_for_times(std::vector<double>{0.0, 0.3, 0.4, 0.8, 1.0}, 7);
  const Eigen::VectorXd x = uniform_grid(50);
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(basis.num_columns());
  coef[0] = -1.5;
  coef[1] = 2.25;
  const Eigen::VectorXd f = build_design(x, basis) * coef;
  CHECK((f - (Eigen::VectorXd::Constant(50, -1.5) + 2.25 * x)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("100 uniform times with K'=23 give a full-rank Z block") {
  std::vector<double> u;
  for (int k = 0; k < 100; ++k) u.push_back(k / 99.0);
  const auto basis = make_spline_basis_for_times(u, 23);
  Eigen::VectorXd t = Eigen::Map<Eigen::VectorXd>(u.data(), 100);
  const Eigen::MatrixXd z = build_design(t, basis).rightCols(23);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(z.transpose() * z);
  lu.setThreshold(1e-10);
  CHECK(lu.rank() == 23);
}

TEST_CASE("penalty structure") {
  for (int kp : {7, 15, 40}) {
    std::vector<double> u;
    for (int k = 0; k < 200; ++k) u.push_back(k / 199.0);
    const auto basis = make_spline_basis_for_times(u, kp);
    const Eigen::MatrixXd omega = roughness_penalty(basis.knot_vector, basis.degree);
    CHECK((omega - omega.transpose()).cwiseAbs().maxCoeff() < 1e-12 * omega.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega);
    const double top = es.eigenvalues().maxCoeff();
    int positive = 0;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) positive += es.eigenvalues()[k] >= 1e-10 * top;
    CHECK(positive == kp);
    CHECK(basis.penalty_null_dim == 2);
    CHECK(basis.z_map.rows() == kp + 2);
    CHECK(basis.z_map.cols() == kp);
  }
}

TEST_CASE("Z coefficient norm equals integrated squared second derivative") {
  Rng rng(2024, 5);
  for (int trial = 0; trial < 20; ++trial) {
    const int kp = static_cast<int>(rng.uniform_int(7, 30));
    std::vector<double> t;
    for (int k = 0; k < 60; ++k) t.push_back(rng.uniform());
    t.push_back(0.0);
    t.push_back(1.0);
    const auto basis = make_spline_basis_for_times(t, kp);
    Eigen::VectorXd z(kp);
    for (int k = 0; k < kp; ++k) z[k] = rng.normal();
    const Eigen::VectorXd raw = basis.z_map * z;
    const double quad = roughness_by_quadrature(basis, raw);
    CHECK(std::abs(quad - z.squaredNorm()) < 1e-6 * z.squaredNorm());
  }
}

TEST_CASE("constants and lines have no penalized energy") {
  const auto basis = make_spline_basis_for_times(std::vector<double>{0.0, 0.1, 0.15, 0.6, 0.7, 1.0}, 11);
  const Eigen::MatrixXd omega = roughness_penalty(basis.knot_vector, basis.degree);
  // Z coefficients of raw coefficients v are (Z'Z)^{-1} Z' v, whose norm is sqrt(v' Omega v).
  const Eigen::MatrixXd zz = basis.z_map.transpose() * basis.z_map;
  for (const Eigen::VectorXd& v : {Eigen::VectorXd(Eigen::VectorXd::Ones(basis.num_columns())), greville(basis)}) {
    const Eigen::VectorXd u = zz.ldlt().solve(basis.z_map.transpose() * v);
    CHECK(u.norm() < 1e-8);
    CHECK(std::abs(v.dot(omega * v)) < 1e-8);
  }
  // The Greville abscissae reproduce t exactly.
  const Eigen::VectorXd x = uniform_grid(33);
  CHECK((bspline_basis(x, basis.knot_vector, basis.degree) * greville(basis) - x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("trapezoid weights") {
  const auto w = trapezoid_weights(101);
  CHECK(w.sum() == doctest::Approx(1.0));
  CHECK(w[0] == doctest::Approx(0.005));
  CHECK(w[50] == doctest::Approx(0.01));
}

#include "funfactor/splines.hpp"

#include <algorithm>
#include <cmath>

#include "funfactor/error.hpp"

namespace funfactor {

int choose_num_basis(long total_obs) {
  if (total_obs < 1) throw Error(ErrorKind::InvalidArgument, "choose_num_basis needs at least one observation");
  const long quarter = total_obs / 4;
  return static_cast<int>(std::max<long>(std::min<long>(quarter, 40), 7));
}

Eigen::VectorXd place_knots(std::span<const double> times, int num_penalized) {
  if (num_penalized < 7) throw Error(ErrorKind::InvalidArgument, "K' must be at least 7");
  std::vector<double> distinct(times.begin(), times.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw Error(ErrorKind::DegenerateTimes, "knot placement needs at least 2 distinct times");

  const int count = num_penalized - 2;
  const double last = static_cast<double>(distinct.size() - 1);
  Eigen::VectorXd knots(count);
  constexpr double kLadder = 1e-9;
  double prev = 0.0;
  for (int k = 0; k < count; ++k) {
    const double h = last * (k + 1) / static_cast<double>(num_penalized - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, distinct.size() - 1);
    double q = distinct[lo] + (h - static_cast<double>(lo)) * (distinct[hi] - distinct[lo]);
    if (q <= prev) q = prev + kLadder;
    knots[k] = q;
    prev = q;
  }
  // Pull the tail back inside (0,1) if the ladder pushed it out.
  double ceiling = 1.0;
  for (int k = count - 1; k >= 0; --k) {
    if (knots[k] >= ceiling) knots[k] = ceiling - kLadder;
    ceiling = knots[k];
  }
  return knots;
}

Eigen::VectorXd clamped_knot_vector(const Eigen::VectorXd& interior, int degree, double lo, double hi) {
  const Eigen::Index n = interior.size() + 2 * (degree + 1);
  Eigen::VectorXd t(n);
  for (int k = 0; k <= degree; ++k) {
    t[k] = lo;
    t[n - 1 - k] = hi;
  }
  t.segment(degree + 1, interior.size()) = interior;
  return t;
}

namespace {

// Values (deriv = 0) or derivatives of every basis function at one point.
void basis_row(double x, const Eigen::VectorXd& t, int degree, int deriv, double* out) {
  const int m = static_cast<int>(t.size());
  const int nb = m - degree - 1;
  if (deriv > degree) {
    std::fill(out, out + nb, 0.0);
    return;
  }
  const double lo = t[degree];
  const double hi = t[nb];
  x = std::clamp(x, lo, hi);

  int span;
  if (x >= hi) {
    span = nb - 1;
    while (span > degree && !(t[span + 1] > t[span])) --span;
  } else {
    span = static_cast<int>(std::upper_bound(t.data() + degree, t.data() + nb + 1, x) - t.data()) - 1;
  }

  std::vector<double> v(static_cast<std::size_t>(m - 1), 0.0);
  v[static_cast<std::size_t>(span)] = 1.0;
  const int value_degree = degree - deriv;
  for (int k = 1; k <= value_degree; ++k) {
    for (int i = 0; i < m - 1 - k; ++i) {
      double acc = 0.0;
      const double d1 = t[i + k] - t[i];
      const double d2 = t[i + k + 1] - t[i + 1];
      if (d1 > 0.0) acc += (x - t[i]) / d1 * v[i];
      if (d2 > 0.0) acc += (t[i + k + 1] - x) / d2 * v[i + 1];
      v[i] = acc;
    }
  }
  for (int k = value_degree + 1; k <= degree; ++k) {
    for (int i = 0; i < m - 1 - k; ++i) {
      const double d1 = t[i + k] - t[i];
      const double d2 = t[i + k + 1] - t[i + 1];
      double acc = 0.0;
      if (d1 > 0.0) acc += v[i] / d1;
      if (d2 > 0.0) acc -= v[i + 1] / d2;
      v[i] = k * acc;
    }
  }
  std::copy(v.begin(), v.begin() + nb, out);
}

}  // namespace

Eigen::MatrixXd bspline_basis(const Eigen::VectorXd& x, const Eigen::VectorXd& knot_vector, int degree,
                              int deriv) {
  const Eigen::Index nb = knot_vector.size() - degree - 1;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(x.size(), nb);
  for (Eigen::Index r = 0; r < x.size(); ++r) basis_row(x[r], knot_vector, degree, deriv, out.row(r).data());
  return out;
}

Eigen::MatrixXd roughness_penalty(const Eigen::VectorXd& knot_vector, int degree) {
  // 4-point Gauss-Legendre is exact for the piecewise polynomial products
  // (degree 2*(degree-2) <= 7 for cubic and quartic splines).
  static constexpr double kNodes[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                       0.8611363115940526};
  static constexpr double kWeights[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                         0.3478548451374538};
  const Eigen::Index nb = knot_vector.size() - degree - 1;
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(nb, nb);
  Eigen::VectorXd x(1);
  for (Eigen::Index a = degree; a < nb; ++a) {
    const double left = knot_vector[a];
    const double right = knot_vector[a + 1];
    if (!(right > left)) continue;
    const double half = 0.5 * (right - left);
    const double mid = 0.5 * (right + left);
    for (int g = 0; g < 4; ++g) {
      x[0] = mid + half * kNodes[g];
      const Eigen::RowVectorXd d2 = bspline_basis(x, knot_vector, degree, 2).row(0);
      omega.noalias() += (kWeights[g] * half) * d2.transpose() * d2;
    }
  }
  return 0.5 * (omega + omega.transpose());
}

OSullivanTransform osullivan_transform(const Eigen::MatrixXd& raw_design, const Eigen::MatrixXd& penalty,
                                       int num_penalized) {
  if (penalty.rows() != penalty.cols() || penalty.rows() != raw_design.cols())
    throw Error(ErrorKind::DimensionMismatch, "penalty must be square with one row per raw basis column");
  const double asym = (penalty - penalty.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, penalty.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::PenaltyRankError, "penalty matrix is not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(penalty);
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::PenaltyRankError, "penalty eigendecomposition failed");
  const Eigen::Index n = penalty.rows();
  Eigen::VectorXd values = eig.eigenvalues().reverse();
  Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  const double threshold = 1e-10 * values[0];
  int positive = 0;
  for (Eigen::Index k = 0; k < n; ++k)
    if (values[k] > threshold) ++positive;
  if (positive != num_penalized)
    throw Error(ErrorKind::PenaltyRankError, "penalty has " + std::to_string(positive) +
                                                 " positive eigenvalues, expected " + std::to_string(num_penalized));

  OSullivanTransform out;
  out.eigenvalues = values;
  out.null_dim = static_cast<int>(n) - positive;
  out.z_map.resize(n, positive);
  for (int k = 0; k < positive; ++k) {
    Eigen::VectorXd u = vectors.col(k);
    Eigen::Index arg;
    u.cwiseAbs().maxCoeff(&arg);
    if (u[arg] < 0.0) u = -u;
    out.z_map.col(k) = u / std::sqrt(values[k]);
  }
  out.z_design = raw_design * out.z_map;
  return out;
}

SplineBasis make_spline_basis(const Eigen::VectorXd& interior_knots, int degree) {
  SplineBasis basis;
  basis.degree = degree;
  basis.interior_knots = interior_knots;
  basis.num_penalized = static_cast<int>(interior_knots.size()) + 2;
  basis.knot_vector = clamped_knot_vector(interior_knots, degree);
  const Eigen::MatrixXd omega = roughness_penalty(basis.knot_vector, degree);
  const auto transform = osullivan_transform(Eigen::MatrixXd::Identity(omega.rows(), omega.cols()), omega,
                                             basis.num_penalized);
  basis.z_map = transform.z_map;
  basis.penalty_eigenvalues = transform.eigenvalues;
  basis.penalty_null_dim = transform.null_dim;
  return basis;
}

SplineBasis make_spline_basis_for_times(std::span<const double> times, int num_penalized) {
  std::vector<double> distinct(times.begin(), times.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const int k = num_penalized > 0 ? num_penalized : choose_num_basis(static_cast<long>(distinct.size()));
  return make_spline_basis(place_knots(distinct, k));
}

Eigen::MatrixXd build_design(const Eigen::VectorXd& times, const SplineBasis& basis) {
  Eigen::MatrixXd design(times.size(), basis.num_columns());
  design.col(0).setOnes();
  design.col(1) = times;
  design.rightCols(basis.num_penalized) = bspline_basis(times, basis.knot_vector, basis.degree) * basis.z_map;
  return design;
}

Eigen::VectorXd uniform_grid(int size) { return Eigen::VectorXd::LinSpaced(size, 0.0, 1.0); }

Eigen::VectorXd trapezoid_weights(int size) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(size, 1.0 / (size - 1));
  w[0] *= 0.5;
  w[size - 1] *= 0.5;
  return w;
}

}  // namespace funfactor

#include "funfactor/variational_state.hpp"

#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "funfactor/error.hpp"

namespace funfactor {

double digamma(double x) { return boost::math::digamma(x); }
double log_gamma(double x) { return boost::math::lgamma(x); }
double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

void GaussianFactor::set_cov(Eigen::MatrixXd new_cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(new_cov);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NumericalPD, "covariance is not positive definite");
  log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  cov = std::move(new_cov);
}

double InvGammaFactor::entropy() const {
  return shape + std::log(rate) + log_gamma(shape) - (1.0 + shape) * digamma(shape);
}

double VariancePair::mean() const {
  if (fixed) return *fixed;
  if (var.shape <= 1.0) return std::numeric_limits<double>::infinity();
  return var.rate / (var.shape - 1.0);
}

Eigen::MatrixXd VariationalState::eigen_means(int q) const {
  Eigen::MatrixXd v(K, L);
  for (int l = 0; l < L; ++l) v.col(l) = eigen(q, l).mean;
  return v;
}

Eigen::MatrixXd VariationalState::loading_means() const {
  Eigen::MatrixXd m(p, Q);
  for (int j = 0; j < p; ++j)
    for (int q = 0; q < Q; ++q) m(j, q) = loading(j, q).mean();
  return m;
}

Eigen::MatrixXd VariationalState::loading_second_moments() const {
  Eigen::MatrixXd m(p, Q);
  for (int j = 0; j < p; ++j)
    for (int q = 0; q < Q; ++q) m(j, q) = loading(j, q).second_moment();
  return m;
}

Eigen::MatrixXd VariationalState::inclusion_probabilities() const {
  Eigen::MatrixXd m(p, Q);
  for (int j = 0; j < p; ++j)
    for (int q = 0; q < Q; ++q) m(j, q) = loading(j, q).gamma;
  return m;
}

Eigen::VectorXd VariationalState::noise_precisions() const {
  Eigen::VectorXd tau(p);
  for (int j = 0; j < p; ++j) tau[j] = noise[static_cast<std::size_t>(j)].mean_inv();
  return tau;
}

namespace {

void check_gaussian(const GaussianFactor& g, Eigen::Index dim, const char* what) {
  if (g.mean.size() != dim || g.cov.rows() != dim || g.cov.cols() != dim)
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + " has the wrong dimension");
  Eigen::LLT<Eigen::MatrixXd> llt(g.cov);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NumericalPD, std::string(what) + " covariance not PD");
}

void check_ig(const InvGammaFactor& f, const char* what) {
  if (!(f.shape > 0.0) || !(f.rate > 0.0))
    throw Error(ErrorKind::NonPositiveShape, std::string(what) + " inverse-Gamma parameters must be positive");
}

void check_pair(const VariancePair& v, const char* what) {
  if (v.fixed) return;
  check_ig(v.var, what);
  check_ig(v.aux, what);
}

}  // namespace

void VariationalState::check_invariants() const {
  for (const auto& g : mean_coef) check_gaussian(g, K, "mean coefficients");
  for (const auto& g : eigen_coef) check_gaussian(g, K, "eigen coefficients");
  for (const auto& g : scores) check_gaussian(g, L, "scores");
  for (const auto& v : noise) check_pair(v, "noise variance");
  for (const auto& v : mean_smoothing) check_pair(v, "mean smoothing variance");
  for (const auto& v : eigen_smoothing) check_pair(v, "eigen smoothing variance");
  for (const auto& s : loadings) {
    if (!(s.gamma >= 0.0 && s.gamma <= 1.0)) throw Error(ErrorKind::InvalidArgument, "gamma* outside [0,1]");
    if (!(s.var > 0.0)) throw Error(ErrorKind::NonPositiveShape, "slab variance must be positive");
  }
  for (const auto& w : weights)
    if (!(w.a > 0.0 && w.b > 0.0)) throw Error(ErrorKind::NonPositiveShape, "Beta parameters must be positive");
}

// ---------------------------------------------------------------------------
// Binary state file: magic, version, dimensions, then every factor in order.

namespace {

constexpr std::uint32_t kMagic = 0x53564646;  // "FFVS"
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorKind::IOError, "truncated state file");
  return v;
}

void put_gaussian(std::ostream& out, const GaussianFactor& g) {
  out.write(reinterpret_cast<const char*>(g.mean.data()), static_cast<std::streamsize>(sizeof(double) * g.mean.size()));
  out.write(reinterpret_cast<const char*>(g.cov.data()), static_cast<std::streamsize>(sizeof(double) * g.cov.size()));
  put(out, g.log_det);
}

GaussianFactor get_gaussian(std::istream& in, int dim) {
  GaussianFactor g;
  g.mean.resize(dim);
  g.cov.resize(dim, dim);
  in.read(reinterpret_cast<char*>(g.mean.data()), static_cast<std::streamsize>(sizeof(double) * dim));
  in.read(reinterpret_cast<char*>(g.cov.data()), static_cast<std::streamsize>(sizeof(double) * dim * dim));
  g.log_det = get<double>(in);
  return g;
}

void put_pair(std::ostream& out, const VariancePair& v) {
  put(out, v.var.shape);
  put(out, v.var.rate);
  put(out, v.aux.shape);
  put(out, v.aux.rate);
  put<std::uint8_t>(out, v.fixed ? 1 : 0);
  put(out, v.fixed.value_or(0.0));
}

VariancePair get_pair(std::istream& in) {
  VariancePair v;
  v.var.shape = get<double>(in);
  v.var.rate = get<double>(in);
  v.aux.shape = get<double>(in);
  v.aux.rate = get<double>(in);
  const auto has_fixed = get<std::uint8_t>(in);
  const auto value = get<double>(in);
  if (has_fixed) v.fixed = value;
  return v;
}

}  // namespace

void save_state(const VariationalState& s, std::ostream& out) {
  put(out, kMagic);
  put(out, kVersion);
  for (int d : {s.N, s.p, s.Q, s.L, s.K}) put<std::int32_t>(out, d);
  put<std::uint8_t>(out, s.loadings_frozen ? 1 : 0);
  for (const auto& g : s.mean_coef) put_gaussian(out, g);
  for (const auto& g : s.eigen_coef) put_gaussian(out, g);
  for (const auto& g : s.scores) put_gaussian(out, g);
  for (const auto& v : s.noise) put_pair(out, v);
  for (const auto& v : s.mean_smoothing) put_pair(out, v);
  for (const auto& v : s.eigen_smoothing) put_pair(out, v);
  for (const auto& b : s.loadings) {
    put(out, b.gamma);
    put(out, b.mu);
    put(out, b.var);
  }
  for (const auto& w : s.weights) {
    put(out, w.a);
    put(out, w.b);
  }
  if (!out) throw Error(ErrorKind::IOError, "failed writing state");
}

VariationalState load_state(std::istream& in) {
  if (get<std::uint32_t>(in) != kMagic) throw Error(ErrorKind::IOError, "not a funfactor state file");
  if (get<std::uint32_t>(in) != kVersion) throw Error(ErrorKind::IOError, "unsupported state file version");
  VariationalState s;
  s.N = get<std::int32_t>(in);
  s.p = get<std::int32_t>(in);
  s.Q = get<std::int32_t>(in);
  s.L = get<std::int32_t>(in);
  s.K = get<std::int32_t>(in);
  s.loadings_frozen = get<std::uint8_t>(in) != 0;
  const auto n = [](int v) { return static_cast<std::size_t>(v); };
  for (std::size_t k = 0; k < n(s.p); ++k) s.mean_coef.push_back(get_gaussian(in, s.K));
  for (std::size_t k = 0; k < n(s.Q * s.L); ++k) s.eigen_coef.push_back(get_gaussian(in, s.K));
  for (std::size_t k = 0; k < n(s.N * s.Q); ++k) s.scores.push_back(get_gaussian(in, s.L));
  for (std::size_t k = 0; k < n(s.p); ++k) s.noise.push_back(get_pair(in));
  for (std::size_t k = 0; k < n(s.p); ++k) s.mean_smoothing.push_back(get_pair(in));
  for (std::size_t k = 0; k < n(s.Q * s.L); ++k) s.eigen_smoothing.push_back(get_pair(in));
  for (std::size_t k = 0; k < n(s.p * s.Q); ++k) {
    SpikeSlabFactor b;
    b.gamma = get<double>(in);
    b.mu = get<double>(in);
    b.var = get<double>(in);
    s.loadings.push_back(b);
  }
  for (std::size_t k = 0; k < n(s.Q); ++k) {
    BetaFactor w;
    w.a = get<double>(in);
    w.b = get<double>(in);
    s.weights.push_back(w);
  }
  return s;
}

}  // namespace funfactor

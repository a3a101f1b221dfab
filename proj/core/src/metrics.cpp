#include "funfactor/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "funfactor/error.hpp"

namespace funfactor {

std::string to_string(CoverageTarget target) {
  switch (target) {
    case CoverageTarget::empirical: return "empirical";
    case CoverageTarget::analytic: return "analytic";
    case CoverageTarget::signal: return "signal";
  }
  return "empirical";
}

CoverageTarget coverage_target_from_string(const std::string& name) {
  if (name == "empirical") return CoverageTarget::empirical;
  if (name == "analytic") return CoverageTarget::analytic;
  if (name == "signal") return CoverageTarget::signal;
  throw Error(ErrorKind::InvalidArgument, "unknown coverage target '" + name + "'");
}

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const auto n = static_cast<int>(cost.rows());
  const auto m = static_cast<int>(cost.cols());
  if (n > m) throw Error(ErrorKind::InvalidArgument, "hungarian needs rows <= cols");
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials formulation, 1-based with a virtual column 0.
  std::vector<double> u(static_cast<std::size_t>(n + 1)), v(static_cast<std::size_t>(m + 1));
  std::vector<int> match(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (used[ju]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[ju];
        if (cur < minv[ju]) {
          minv[ju] = cur;
          way[ju] = j0;
        }
        if (minv[ju] < delta) {
          delta = minv[ju];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (used[ju]) {
          u[static_cast<std::size_t>(match[ju])] += delta;
          v[ju] -= delta;
        } else {
          minv[ju] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (match[static_cast<std::size_t>(j)] > 0) assignment[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return assignment;
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) return 0.0;
  const Eigen::ArrayXd x = a.array() - a.mean();
  const Eigen::ArrayXd y = b.array() - b.mean();
  const double den = std::sqrt((x * x).sum() * (y * y).sum());
  return den > 0.0 ? (x * y).sum() / den : 0.0;
}

namespace {

/// Assignment maximising `similarity` (rows: truth, cols: estimate). Entries
/// are -1 for truth rows left unmatched.
std::vector<int> best_match(const Eigen::MatrixXd& similarity) {
  const auto n = similarity.rows();
  const auto m = similarity.cols();
  if (n <= m) return hungarian(-similarity);
  const auto rev = hungarian(-similarity.transpose());
  std::vector<int> out(static_cast<std::size_t>(n), -1);
  for (std::size_t c = 0; c < rev.size(); ++c)
    if (rev[c] >= 0) out[static_cast<std::size_t>(rev[c])] = static_cast<int>(c);
  return out;
}

struct ComponentMatch {
  std::vector<int> component;
  std::vector<int> sign;
  std::vector<double> corr;
  double similarity = 0.0;
};

ComponentMatch match_components(const FactorResult& est, const SimTruth& truth, int q) {
  const auto& ts = truth.scores[static_cast<std::size_t>(q)];
  const auto& tf = truth.eigenfunctions[static_cast<std::size_t>(q)];
  const auto lt = ts.cols();
  const auto le = est.scores.cols();
  Eigen::MatrixXd sim(lt, le), signed_corr(lt, le);
  for (Eigen::Index l = 0; l < lt; ++l)
    for (Eigen::Index k = 0; k < le; ++k) {
      const double c = correlation(ts.col(l), est.scores.col(k));
      double tie = 0.0;
      if (est.eigenfunctions.rows() == tf.rows()) tie = std::abs(correlation(tf.col(l), est.eigenfunctions.col(k)));
      signed_corr(l, k) = c;
      sim(l, k) = std::abs(c) + 1e-6 * tie;
    }
  ComponentMatch out;
  out.component = best_match(sim);
  for (Eigen::Index l = 0; l < lt; ++l) {
    const int k = out.component[static_cast<std::size_t>(l)];
    const double c = k >= 0 ? signed_corr(l, k) : 0.0;
    out.sign.push_back(c < 0.0 ? -1 : 1);
    out.corr.push_back(std::abs(c));
    out.similarity += k >= 0 ? sim(l, k) : 0.0;
  }
  out.similarity /= static_cast<double>(std::max<Eigen::Index>(lt, 1));
  return out;
}

}  // namespace

AlignmentMap align_components(const FitResult& est, const SimTruth& truth) {
  const int qt = truth.config.Q;
  const auto& kept = est.retained;
  const auto nr = static_cast<Eigen::Index>(kept.size());
  AlignmentMap map;
  map.factor.assign(static_cast<std::size_t>(qt), -1);
  map.component.resize(static_cast<std::size_t>(qt));
  map.sign.resize(static_cast<std::size_t>(qt));
  map.correlation.resize(static_cast<std::size_t>(qt));

  std::vector<std::vector<ComponentMatch>> pairs(static_cast<std::size_t>(qt));
  Eigen::MatrixXd sim(qt, nr);
  for (int q = 0; q < qt; ++q)
    for (Eigen::Index r = 0; r < nr; ++r) {
      pairs[static_cast<std::size_t>(q)].push_back(
          match_components(est.factors[static_cast<std::size_t>(kept[static_cast<std::size_t>(r)])], truth, q));
      sim(q, r) = pairs[static_cast<std::size_t>(q)].back().similarity;
    }
  const auto match = nr > 0 ? best_match(sim) : std::vector<int>(static_cast<std::size_t>(qt), -1);
  const auto lt = truth.config.L;
  for (int q = 0; q < qt; ++q) {
    const auto qu = static_cast<std::size_t>(q);
    const int r = match[qu];
    if (r < 0) {
      ++map.misses;
      map.component[qu].assign(static_cast<std::size_t>(lt), -1);
      map.sign[qu].assign(static_cast<std::size_t>(lt), 1);
      map.correlation[qu].assign(static_cast<std::size_t>(lt), 0.0);
      continue;
    }
    const auto& cm = pairs[qu][static_cast<std::size_t>(r)];
    map.factor[qu] = kept[static_cast<std::size_t>(r)];
    map.component[qu] = cm.component;
    map.sign[qu] = cm.sign;
    map.correlation[qu] = cm.corr;
  }
  return map;
}

double integrated_squared_error(const Eigen::VectorXd& f_true, const Eigen::VectorXd& f_est) {
  if (f_true.size() != f_est.size() || f_true.size() < 2)
    throw Error(ErrorKind::GridMismatch, "functions must share a grid of at least two points");
  const Eigen::VectorXd w = trapezoid_weights(static_cast<int>(f_true.size()));
  return w.dot((f_true - f_est).array().square().matrix());
}

double roc_auc(const Eigen::VectorXd& scores, const Eigen::VectorXi& labels) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::DimensionMismatch, "scores and labels differ in length");
  const auto n = scores.size();
  long pos = 0;
  for (Eigen::Index k = 0; k < n; ++k) pos += labels[k] != 0 ? 1 : 0;
  const long neg = static_cast<long>(n) - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorKind::DegenerateLabels, "AUC needs both positive and negative labels");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    std::size_t e = k;
    while (e + 1 < order.size() && scores[order[e + 1]] == scores[order[k]]) ++e;
    const double midrank = 0.5 * (static_cast<double>(k) + static_cast<double>(e)) + 1.0;
    for (std::size_t t = k; t <= e; ++t)
      if (labels[order[t]] != 0) rank_sum += midrank;
    k = e + 1;
  }
  const double u = rank_sum - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

namespace {

Eigen::VectorXd aligned_column(const Eigen::MatrixXd& score, const AlignmentMap& alignment, int q) {
  const int f = alignment.factor[static_cast<std::size_t>(q)];
  return f >= 0 ? Eigen::VectorXd(score.col(f)) : Eigen::VectorXd::Zero(score.rows());
}

}  // namespace

double loading_auc(const Eigen::MatrixXd& score, const Eigen::MatrixXi& support, const AlignmentMap& alignment) {
  const auto p = support.rows();
  const auto qt = support.cols();
  Eigen::VectorXd s(p * qt);
  Eigen::VectorXi lab(p * qt);
  for (Eigen::Index q = 0; q < qt; ++q) {
    s.segment(q * p, p) = aligned_column(score, alignment, static_cast<int>(q));
    lab.segment(q * p, p) = support.col(q);
  }
  return roc_auc(s, lab);
}

double loading_auc_factor(const Eigen::MatrixXd& score, const Eigen::MatrixXi& support, const AlignmentMap& alignment,
                          int q) {
  try {
    return roc_auc(aligned_column(score, alignment, q), support.col(q));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateLabels) throw;
    return std::numeric_limits<double>::quiet_NaN();
  }
}

CoverageResult band_coverage_width(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& upper,
                                   const Eigen::MatrixXd& signal, double noise_sd, CoverageTarget target, Rng& rng) {
  if (lower.rows() != upper.rows() || lower.cols() != upper.cols() || lower.rows() != signal.rows() ||
      lower.cols() != signal.cols())
    throw Error(ErrorKind::GridMismatch, "bands and targets must share a grid");
  CoverageResult out;
  double hits = 0.0;
  double width = 0.0;
  const boost::math::normal_distribution<double> std_normal;
  for (Eigen::Index c = 0; c < lower.cols(); ++c)
    for (Eigen::Index r = 0; r < lower.rows(); ++r) {
      const double lo = lower(r, c);
      const double hi = upper(r, c);
      const double s = signal(r, c);
      width += hi - lo;
      if (target == CoverageTarget::signal || noise_sd == 0.0) {
        hits += (s >= lo && s <= hi) ? 1.0 : 0.0;
      } else if (target == CoverageTarget::empirical) {
        const double y = s + noise_sd * rng.normal();
        hits += (y >= lo && y <= hi) ? 1.0 : 0.0;
      } else {
        const auto cdf = [&](double x) {
          if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
          return boost::math::cdf(std_normal, x);
        };
        hits += std::max(0.0, cdf((hi - s) / noise_sd) - cdf((lo - s) / noise_sd));
      }
      ++out.points;
    }
  if (out.points > 0) {
    out.coverage = 100.0 * hits / static_cast<double>(out.points);
    out.width = width / static_cast<double>(out.points);
  }
  return out;
}

std::map<std::string, double> evaluate_fit(const VariationalState& state, const FitResult& fit, const SimTruth& truth,
                                           const EvaluationOptions& options) {
  if (state.p != truth.config.p || state.N != truth.config.N)
    throw Error(ErrorKind::MismatchError, "fit and truth differ in p or N");
  if (fit.grid.size() != truth.grid.size())
    throw Error(ErrorKind::GridMismatch, "fit and truth use different dense grids");
  std::map<std::string, double> m;
  const auto alignment = align_components(fit, truth);
  const int qt = truth.config.Q;
  const int p = state.p;
  const int N = state.N;

  m["factors"] = static_cast<double>(fit.retained.size());
  m["misses"] = alignment.misses;
  m["auc"] = loading_auc(fit.gamma, truth.support, alignment);
  m["auc_abs_mean"] = loading_auc(fit.loading_mean.cwiseAbs(), truth.support, alignment);
  for (int q = 0; q < qt; ++q)
    m["auc_factor" + std::to_string(q + 1)] = loading_auc_factor(fit.gamma, truth.support, alignment, q);

  double ise_mean = 0.0;
  for (int j = 0; j < p; ++j) ise_mean += integrated_squared_error(truth.mean_functions.col(j), fit.mean_functions.col(j));
  m["ise_mean"] = ise_mean / p;

  double corr_sum = 0.0;
  double eig_ise = 0.0;
  int matched = 0;
  for (int q = 0; q < qt; ++q) {
    const int f = alignment.factor[static_cast<std::size_t>(q)];
    if (f < 0) continue;
    const auto& ef = fit.factors[static_cast<std::size_t>(f)];
    for (int l = 0; l < truth.config.L; ++l) {
      const int k = alignment.component[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)];
      if (k < 0) continue;
      const double sgn = alignment.sign[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)];
      corr_sum += alignment.correlation[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)];
      eig_ise += integrated_squared_error(truth.eigenfunctions[static_cast<std::size_t>(q)].col(l),
                                          sgn * ef.eigenfunctions.col(k));
      ++matched;
    }
  }
  m["score_corr"] = matched > 0 ? corr_sum / matched : 0.0;
  m["ise_eigen"] = matched > 0 ? eig_ise / matched : std::numeric_limits<double>::quiet_NaN();

  // Noise-free truth and posterior-mean trajectories on the grid.
  std::vector<Eigen::MatrixXd> true_h(static_cast<std::size_t>(qt));
  for (int q = 0; q < qt; ++q) true_h[static_cast<std::size_t>(q)] = truth.factor_curves(q);
  std::vector<Eigen::MatrixXd> est_h(static_cast<std::size_t>(state.Q));
  for (int q = 0; q < state.Q; ++q) est_h[static_cast<std::size_t>(q)] = factor_curves(state, fit.basis, q, fit.grid);
  const auto signal_for = [&](int j) {
    Eigen::MatrixXd s = truth.mean_functions.col(j).transpose().replicate(N, 1);
    for (int q = 0; q < qt; ++q)
      if (truth.loadings(j, q) != 0.0) s += truth.loadings(j, q) * true_h[static_cast<std::size_t>(q)];
    return s;
  };
  double ise_y = 0.0;
  for (int j = 0; j < p; ++j) {
    const Eigen::MatrixXd s = signal_for(j);
    Eigen::MatrixXd f = fit.mean_functions.col(j).transpose().replicate(N, 1);
    for (int q = 0; q < state.Q; ++q) f += state.loading(j, q).mean() * est_h[static_cast<std::size_t>(q)];
    for (int i = 0; i < N; ++i) ise_y += integrated_squared_error(s.row(i).transpose(), f.row(i).transpose());
  }
  m["ise_y"] = ise_y / (static_cast<double>(p) * N);

  if (options.bands) {
    double hits = 0.0;
    double width = 0.0;
    long points = 0;
    predict_all_bands(
        state, fit.basis, fit.grid, options.level, options.band_draws, options.seed,
        [&](int j, const Eigen::MatrixXd&, const Eigen::MatrixXd& lower, const Eigen::MatrixXd& upper) {
          Rng rng(derive_seed(options.seed, 1000003), static_cast<std::uint64_t>(j));
          const auto cov = band_coverage_width(lower, upper, signal_for(j), truth.config.noise_sd, options.target, rng);
          hits += cov.coverage * static_cast<double>(cov.points);
          width += cov.width * static_cast<double>(cov.points);
          points += cov.points;
        },
        options.threads);
    m["coverage"] = hits / static_cast<double>(points);
    m["width"] = width / static_cast<double>(points);
  }
  return m;
}

ReplicateReport aggregate_replicates(const std::vector<std::map<std::string, double>>& replicates) {
  if (replicates.empty()) throw Error(ErrorKind::InvalidArgument, "aggregation needs at least one replicate");
  ReplicateReport rep;
  rep.raw = replicates;
  for (const auto& r : replicates)
    for (const auto& [name, _] : r)
      if (std::find(rep.names.begin(), rep.names.end(), name) == rep.names.end()) rep.names.push_back(name);
  for (const auto& name : rep.names) {
    std::vector<double> v;
    for (const auto& r : replicates) {
      const auto it = r.find(name);
      if (it != r.end() && std::isfinite(it->second)) v.push_back(it->second);
    }
    MetricSummary s;
    s.se = std::numeric_limits<double>::quiet_NaN();
    s.count = static_cast<int>(v.size());
    if (!v.empty()) s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() >= 2) {
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      s.se = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
    }
    rep.summary[name] = s;
  }
  return rep;
}

std::string format_table(const ReplicateReport& report, const std::string& scenario) {
  const std::vector<std::pair<std::string, std::string>> rows = {{"auc", "AUC"},
                                                                 {"ise_y", "ISE y"},
                                                                 {"coverage", "Coverage (%)"},
                                                                 {"width", "Width"},
                                                                 {"factors", "Number of factors"}};
  std::ostringstream out;
  out << "| Metric | " << scenario << " |\n|---|---|\n";
  out << std::fixed;
  for (const auto& [key, label] : rows) {
    const auto it = report.summary.find(key);
    if (it == report.summary.end()) continue;
    const int digits = key == "coverage" ? 1 : 3;
    out << "| " << label << " | " << std::setprecision(digits) << it->second.mean;
    if (std::isfinite(it->second.se)) out << " (" << it->second.se << ")";
    out << " |\n";
  }
  return out.str();
}

}  // namespace funfactor

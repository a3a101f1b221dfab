#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "funfactor/postprocess.hpp"
#include "funfactor/simulate.hpp"
#include "funfactor/splines.hpp"
#include "funfactor/variational_state.hpp"

namespace funfactor {

/// Minimum-cost assignment of rows to columns (rows <= cols). Returns the
/// column chosen for each row.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

/// Pearson correlation; 0 when either input is constant.
double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Matching of true factors/components to estimated ones.
struct AlignmentMap {
  std::vector<int> factor;                       // per true q: estimated factor, -1 if missed
  std::vector<std::vector<int>> component;       // per true q, per true l: estimated component
  std::vector<std::vector<int>> sign;            // per true q, per true l: +1 / -1
  std::vector<std::vector<double>> correlation;  // matched |corr| of scores
  int misses = 0;
};

/// Matches the retained factors of `est` to the truth by optimal assignment
/// on score |corr| (eigenfunction |corr| breaks ties), then matches
/// components within each factor pair the same way.
AlignmentMap align_components(const FitResult& est, const SimTruth& truth);

/// Trapezoid approximation of the integral of (f - g)^2 over [0,1] on a
/// uniform grid. Throws GridMismatch on size mismatch.
double integrated_squared_error(const Eigen::VectorXd& f_true, const Eigen::VectorXd& f_est);

/// ROC AUC by the midrank (Mann-Whitney) formula. Throws DegenerateLabels when
/// all labels are equal.
double roc_auc(const Eigen::VectorXd& scores, const Eigen::VectorXi& labels);

/// AUC pooled over true factors; each true factor is scored by the column of
/// its matched estimated factor, or zeros if it was missed.
double loading_auc(const Eigen::MatrixXd& score, const Eigen::MatrixXi& support, const AlignmentMap& alignment);
/// Same for a single true factor; NaN when its labels are degenerate.
double loading_auc_factor(const Eigen::MatrixXd& score, const Eigen::MatrixXi& support, const AlignmentMap& alignment,
                          int q);

enum class CoverageTarget { empirical, analytic, signal };
std::string to_string(CoverageTarget target);
CoverageTarget coverage_target_from_string(const std::string& name);

struct CoverageResult {
  double coverage = 0.0;  // percent
  double width = 0.0;
  long points = 0;
};

/// Fraction of grid targets inside [lower, upper]. For the noisy targets the
/// observation is signal + N(0, noise_sd^2), drawn fresh (empirical) or
/// integrated exactly (analytic); `signal` checks the noise-free curve.
CoverageResult band_coverage_width(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& upper,
                                   const Eigen::MatrixXd& signal, double noise_sd, CoverageTarget target, Rng& rng);

struct EvaluationOptions {
  int band_draws = 500;
  double level = 0.95;
  CoverageTarget target = CoverageTarget::empirical;
  std::uint64_t seed = 7;
  int threads = 1;
  bool bands = true;
};

/// Simulation-study metrics (AUC, ISE, coverage, width, factors) for one fit against its truth.
std::map<std::string, double> evaluate_fit(const VariationalState& state, const FitResult& fit, const SimTruth& truth,
                                           const EvaluationOptions& options = {});

struct MetricSummary {
  double mean = 0.0;
  double se = 0.0;
  int count = 0;
};

struct ReplicateReport {
  std::vector<std::string> names;
  std::map<std::string, MetricSummary> summary;
  std::vector<std::map<std::string, double>> raw;
};

/// Mean and standard error (sd / sqrt(R)) of every metric; non-finite values
/// are skipped. The SE is NaN below two finite values.
ReplicateReport aggregate_replicates(const std::vector<std::map<std::string, double>>& replicates);

/// Markdown table of the headline rows present in `report`.
std::string format_table(const ReplicateReport& report, const std::string& scenario);

}  // namespace funfactor

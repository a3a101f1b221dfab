#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace funfactor {

/// One subject's observations. Row r of `values` holds all p variables at
/// `times[r]`.
struct SubjectRecord {
  std::string subject_id;
  Eigen::VectorXd times;
  Eigen::MatrixXd values;
};

/// Affine map from user time units to the internal [0,1] scale:
/// internal = (t - offset) * scale.
struct TimeMap {
  double offset = 0.0;
  double scale = 1.0;

  double to_internal(double t) const { return (t - offset) * scale; }
  double to_original(double u) const { return u / scale + offset; }
  bool is_identity() const { return offset == 0.0 && scale == 1.0; }
  /// Map that applies `*this` first, then `next`.
  TimeMap then(const TimeMap& next) const {
    return TimeMap{offset + next.offset / scale, scale * next.scale};
  }
};

struct LongitudinalDataset {
  std::vector<SubjectRecord> subjects;
  int p = 0;
  /// Declared time domain in user units; when absent the observed range is used.
  std::optional<std::pair<double, double>> time_domain;
  std::vector<std::string> variable_names;
  TimeMap time_map;

  int num_subjects() const { return static_cast<int>(subjects.size()); }
  long total_observations() const;
  /// Pooled distinct observation times across subjects.
  std::vector<double> distinct_times() const;
};

struct DatasetSummary {
  int num_subjects = 0;
  int p = 0;
  long total_observations = 0;
  int min_obs = 0;
  double median_obs = 0.0;
  int max_obs = 0;
};

/// Checks the dataset invariants and rescales times to [0,1]. Times already
/// inside [0,1] (with no declared domain) are left untouched. The applied map
/// is composed onto `time_map`, so validating twice is a no-op.
LongitudinalDataset validate_dataset(LongitudinalDataset raw);

DatasetSummary summarize_dataset(const LongitudinalDataset& data);

}  // namespace funfactor

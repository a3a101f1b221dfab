#include "funfactor/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "funfactor/error.hpp"

namespace funfactor {

long LongitudinalDataset::total_observations() const {
  long total = 0;
  for (const auto& s : subjects) total += s.times.size();
  return total;
}

std::vector<double> LongitudinalDataset::distinct_times() const {
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(total_observations()));
  for (const auto& s : subjects)
    for (Eigen::Index r = 0; r < s.times.size(); ++r) all.push_back(s.times[r]);
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

LongitudinalDataset validate_dataset(LongitudinalDataset raw) {
  if (raw.p < 1) throw Error(ErrorKind::DimensionMismatch, "p must be at least 1");
  if (raw.subjects.size() < 2)
    throw Error(ErrorKind::InvalidArgument, "at least two subjects are required");
  if (!raw.variable_names.empty() && static_cast<int>(raw.variable_names.size()) != raw.p)
    throw Error(ErrorKind::DimensionMismatch, "variable_names must have length p");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : raw.subjects) {
    const auto n = s.times.size();
    if (n == 0) throw Error(ErrorKind::EmptySubject, "subject '" + s.subject_id + "' has no observations");
    if (s.values.rows() != n || s.values.cols() != raw.p)
      throw Error(ErrorKind::DimensionMismatch,
                  "subject '" + s.subject_id + "' values must be n_i x p (" + std::to_string(n) + " x " +
                      std::to_string(raw.p) + ")");
    if (!s.times.allFinite())
      throw Error(ErrorKind::NonFiniteValue, "subject '" + s.subject_id + "' has a non-finite time");
    if (!s.values.allFinite())
      throw Error(ErrorKind::NonFiniteValue, "subject '" + s.subject_id + "' has a non-finite value");
    lo = std::min(lo, s.times.minCoeff());
    hi = std::max(hi, s.times.maxCoeff());
  }

  TimeMap step;
  if (raw.time_domain) {
    const auto [a, b] = *raw.time_domain;
    if (!(std::isfinite(a) && std::isfinite(b) && b > a))
      throw Error(ErrorKind::DegenerateTimes, "time_domain must be a finite interval with b > a");
    if (lo < a || hi > b) throw Error(ErrorKind::InvalidArgument, "observation times fall outside time_domain");
    step = TimeMap{a, 1.0 / (b - a)};
  } else if (lo < 0.0 || hi > 1.0) {
    if (!(hi > lo)) throw Error(ErrorKind::DegenerateTimes, "all observation times are identical");
    step = TimeMap{lo, 1.0 / (hi - lo)};
  }

  if (!step.is_identity()) {
    for (auto& s : raw.subjects) {
      for (Eigen::Index r = 0; r < s.times.size(); ++r)
        s.times[r] = std::clamp(step.to_internal(s.times[r]), 0.0, 1.0);
    }
    raw.time_map = raw.time_map.then(step);
  }
  raw.time_domain = std::make_pair(0.0, 1.0);
  return raw;
}

DatasetSummary summarize_dataset(const LongitudinalDataset& data) {
  DatasetSummary out;
  out.num_subjects = data.num_subjects();
  out.p = data.p;
  std::vector<int> counts;
  counts.reserve(data.subjects.size());
  for (const auto& s : data.subjects) counts.push_back(static_cast<int>(s.times.size()));
  if (counts.empty()) return out;
  std::sort(counts.begin(), counts.end());
  for (int c : counts) out.total_observations += c;
  out.min_obs = counts.front();
  out.max_obs = counts.back();
  const std::size_t m = counts.size();
  out.median_obs = m % 2 == 1 ? counts[m / 2] : 0.5 * (counts[m / 2 - 1] + counts[m / 2]);
  return out;
}

}  // namespace funfactor

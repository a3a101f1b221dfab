#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "funfactor/dataset.hpp"
#include "funfactor/fit.hpp"
#include "funfactor/postprocess.hpp"
#include "funfactor/simulate.hpp"
#include "funfactor/splines.hpp"

namespace funfactor::cli {

/// Everything needed to rebuild a SimTruth; grid-evaluated eigenfunctions
/// and mean functions are included for readers but recomputed on load.
nlohmann::json truth_to_json(const SimTruth& truth);
SimTruth truth_from_json(const nlohmann::json& j);
SimTruth load_truth(const std::string& path);

struct BandRequest {
  int j = 1;  // 1-based variable
  int i = 1;  // 1-based subject
};
/// Parses "j,i" with 1-based indices.
BandRequest parse_band_request(const std::string& text);

struct BandSettings {
  double level = 0.95;
  int draws = 500;
  std::uint64_t seed = 7;
};

/// Writes fit.json, elbo_trace.csv, scores.csv, eigenfunctions.csv,
/// loadings.csv, mean_functions.csv, state.bin and one bands_<j>_<i>.csv per
/// request. `data` is the validated dataset the fit ran on.
void write_fit_artifacts(const std::string& dir, const LongitudinalDataset& data, const FitOutput& out,
                         const FitResult& result, const std::vector<BandRequest>& bands, const BandSettings& settings);

void write_elbo_trace(const std::string& path, const std::vector<ElboRecord>& trace);
std::vector<ElboRecord> read_elbo_trace(const std::string& path);

struct LoadedFit {
  VariationalState state;
  FitResult result;
  TimeMap time_map;
  std::vector<std::string> subject_ids;
};

/// Reads fit.json, state.bin and elbo_trace.csv from a fit directory and
/// re-derives the post-processed summaries.
LoadedFit load_fit(const std::string& dir);

}  // namespace funfactor::cli

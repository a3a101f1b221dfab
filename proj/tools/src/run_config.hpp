#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "funfactor/hyperparameters.hpp"
#include "funfactor/metrics.hpp"
#include "funfactor/simulate.hpp"

namespace funfactor::cli {

inline constexpr int kSchemaVersion = 1;

struct EvaluationConfig {
  int band_draws = 500;
  double level = 0.95;
  CoverageTarget target = CoverageTarget::empirical;
  std::uint64_t seed = 7;
  bool bands = true;
};

struct ReplicateConfig {
  int replicates = 25;
  int jobs = 1;
  std::string scenario = "simulation";
};

struct Paths {
  std::string data;
  std::string truth;
  std::string out;
};

/// Everything a run needs, read from one JSON document. Sections:
/// "simulation" (optionally starting from a "preset"), "model", "evaluation",
/// "replicate" and "paths". Missing keys keep their defaults; unknown keys are
/// rejected.
struct RunConfig {
  int schema_version = kSchemaVersion;
  std::string preset;  // "large_sparse", "moderate_dense" or empty
  SimConfig simulation;
  Hyperparameters model;
  EvaluationConfig evaluation;
  ReplicateConfig replicate;
  Paths paths;
};

/// Throws Error(ConfigError) naming the offending field, or the line and
/// column of a syntax error. `source` prefixes every message.
RunConfig parse_run_config(const std::string& text, const std::string& source = "config");
RunConfig load_run_config(const std::string& path);

/// Every field written out, defaults included. An unset d0 is written as null
/// (meaning p of the data being fitted).
nlohmann::json to_json(const RunConfig& cfg);
nlohmann::json to_json(const SimConfig& cfg);
nlohmann::json to_json(const Hyperparameters& hyper);
/// Reads a "simulation" or "model" section on top of `base`.
SimConfig sim_config_from_json(const nlohmann::json& j, SimConfig base, const std::string& where = "simulation");
Hyperparameters hyperparameters_from_json(const nlohmann::json& j, Hyperparameters base,
                                          const std::string& where = "model");

/// Re-checks the model and simulation sections, mapping failures to ConfigError.
void validate(const RunConfig& cfg);

}  // namespace funfactor::cli

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "artifacts.hpp"
#include "funfactor/error.hpp"
#include "run_config.hpp"

namespace funfactor::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
  kExitPartial = 5,
};

int exit_code_for(ErrorKind kind);

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<int> threads;
  std::optional<int> levels;
  std::optional<double> t_max;
  std::optional<std::string> schedule;
  std::optional<int> q_max;
  std::optional<int> l_max;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

/// Applies `o` (the seed goes to the simulation for `simulate`, to the model
/// otherwise) and re-validates.
void apply_overrides(RunConfig& cfg, const Overrides& o, bool seed_is_simulation = false);

/// Thread count from FUNFACTOR_THREADS, if set to a positive integer.
std::optional<int> threads_from_env();

/// data.csv, truth.json, config.lock.json.
void cmd_simulate(const RunConfig& cfg, const std::string& out_dir);

struct FitSummary {
  FitStatus status = FitStatus::converged;
  int sweeps = 0;
  double elbo = 0.0;
  std::vector<int> retained;  // 1-based
};

/// Fits the long CSV at `data_path` and writes the fit artifacts plus
/// config.lock.json into `out_dir`.
FitSummary cmd_fit(const std::string& data_path, RunConfig cfg, const std::string& out_dir,
                   const std::vector<BandRequest>& bands = {});

/// metrics.json and table.md. Throws MismatchError when the fit and the truth
/// disagree on N or p.
std::map<std::string, double> cmd_evaluate(const std::string& fit_dir, const std::string& truth_path,
                                           const RunConfig& cfg, const std::string& out_dir);

struct ReplicateOutcome {
  int completed = 0;
  int skipped = 0;  // already present and resumed
  int failed = 0;

  /// More than a fifth of the replicates failed.
  bool too_many_failures() const { return 5 * failed > completed + skipped + failed; }
};

/// Runs cfg.replicate.replicates simulate-fit-evaluate cycles, each in
/// out_dir/rep_NNN, with `jobs` concurrent workers of `cfg.model.threads`
/// threads each. Writes replicates.csv and report.md. With `resume`,
/// replicates whose metrics.json exists are read back instead of rerun.
ReplicateOutcome cmd_replicate(const RunConfig& cfg, const std::string& out_dir, bool resume);

}  // namespace funfactor::cli

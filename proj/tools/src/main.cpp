#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace funfactor;
using namespace funfactor::cli;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string data;
  std::string fit_dir;
  std::string truth;
  std::vector<std::string> bands;
  bool resume = false;
  Overrides over;
  std::string schedule;
};

void add_model_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--threads", o.over.threads, "Threads per fit (default: FUNFACTOR_THREADS, then config)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--levels", o.over.levels, "Number of annealing temperatures; 1 runs plain variational Bayes")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tmax", o.over.t_max, "Initial temperature, in (1, 2)");
  cmd->add_option("--schedule", o.over.schedule, "Temperature spacing")
      ->check(CLI::IsMember({"geometric", "harmonic", "linear"}));
  cmd->add_option("--qmax", o.over.q_max, "Maximum number of factors")->check(CLI::PositiveNumber);
  cmd->add_option("--lmax", o.over.l_max, "Maximum number of FPCA components per factor")->check(CLI::PositiveNumber);
  cmd->add_option("--tol", o.over.tol, "Relative ELBO tolerance at T = 1");
  cmd->add_option("--seed", o.over.seed, "Model seed");
}

RunConfig load_config(const std::string& path, const std::string& fallback = {}) {
  if (!path.empty()) return load_run_config(path);
  if (!fallback.empty() && std::filesystem::exists(fallback)) return load_run_config(fallback);
  return RunConfig{};
}

std::string pick(const std::string& flag, const std::string& from_config, const char* what) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  throw Error(ErrorKind::ConfigError, std::string("missing ") + what);
}

void finish_overrides(Options& o) {
  if (!o.over.threads) o.over.threads = threads_from_env();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian functional factor models for sparse longitudinal multivariate data"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Simulate a dataset and its ground truth");
  sim->add_option("--config", o.config, "Run configuration (JSON)")->required();
  sim->add_option("--out", o.out, "Output directory");
  sim->add_option("--seed", o.over.seed, "Simulation seed");

  auto* fitc = app.add_subcommand("fit", "Fit the model to a long-format CSV");
  fitc->add_option("--data", o.data, "Long-format CSV (subject_id,time,variable,value)");
  fitc->add_option("--config", o.config, "Run configuration (JSON)");
  fitc->add_option("--out", o.out, "Output directory");
  fitc->add_option("--bands", o.bands, "Write prediction bands for variable j of subject i (1-based 'j,i'); repeatable");
  add_model_flags(fitc, o);

  auto* eval = app.add_subcommand("evaluate", "Score a fit against simulated truth");
  eval->add_option("--fit", o.fit_dir, "Fit directory")->required();
  eval->add_option("--truth", o.truth, "truth.json from simulate");
  eval->add_option("--config", o.config, "Run configuration (default: the fit's config.lock.json)");
  eval->add_option("--out", o.out, "Output directory (default: the fit directory)");
  eval->add_option("--threads", o.over.threads, "Threads for band computation")->check(CLI::PositiveNumber);

  auto* rep = app.add_subcommand("replicate", "Repeat simulate, fit and evaluate over derived seeds");
  rep->add_option("--config", o.config, "Run configuration (JSON)")->required();
  rep->add_option("--out", o.out, "Output directory");
  rep->add_option("--jobs", o.over.jobs, "Replicates run concurrently")->check(CLI::PositiveNumber);
  rep->add_flag("--resume", o.resume, "Skip replicates that already have metrics.json");
  add_model_flags(rep, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    finish_overrides(o);
    if (sim->parsed()) {
      auto cfg = load_config(o.config);
      apply_overrides(cfg, o.over, true);
      const auto out = pick(o.out, cfg.paths.out, "--out");
      cmd_simulate(cfg, out);
      std::printf("wrote %s/{data.csv,truth.json,config.lock.json}\n", out.c_str());
    } else if (fitc->parsed()) {
      auto cfg = load_config(o.config);
      apply_overrides(cfg, o.over);
      std::vector<BandRequest> bands;
      for (const auto& b : o.bands) bands.push_back(parse_band_request(b));
      const auto data = pick(o.data, cfg.paths.data, "--data");
      const auto out = pick(o.out, cfg.paths.out, "--out");
      const auto s = cmd_fit(data, cfg, out, bands);
      std::printf("%s after %d sweeps, ELBO %.6f, retained factors:", to_string(s.status).c_str(), s.sweeps, s.elbo);
      for (int q : s.retained) std::printf(" %d", q);
      std::printf("%s\n", s.retained.empty() ? " none" : "");
    } else if (eval->parsed()) {
      auto cfg = load_config(o.config, (std::filesystem::path(o.fit_dir) / "config.lock.json").string());
      apply_overrides(cfg, o.over);
      const auto truth = pick(o.truth, cfg.paths.truth, "--truth");
      const auto out = o.out.empty() ? o.fit_dir : o.out;
      const auto m = cmd_evaluate(o.fit_dir, truth, cfg, out);
      for (const auto& [k, v] : m) std::printf("%s %.6g\n", k.c_str(), v);
    } else if (rep->parsed()) {
      auto cfg = load_config(o.config);
      apply_overrides(cfg, o.over);
      const auto out = pick(o.out, cfg.paths.out, "--out");
      const auto r = cmd_replicate(cfg, out, o.resume);
      std::printf("%d run, %d resumed, %d failed; report in %s/report.md\n", r.completed, r.skipped, r.failed,
                  out.c_str());
      if (r.too_many_failures()) return kExitPartial;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitOk;
}

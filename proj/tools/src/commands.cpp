#include "commands.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "csv_io.hpp"
#include "funfactor/dataset.hpp"
#include "funfactor/fit.hpp"
#include "funfactor/metrics.hpp"
#include "funfactor/model_data.hpp"
#include "funfactor/postprocess.hpp"
#include "funfactor/rng.hpp"
#include "funfactor/simulate.hpp"

namespace funfactor::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError: return kExitConfig;
    case ErrorKind::NumericalPD:
    case ErrorKind::NonPositiveShape:
    case ErrorKind::DegenerateFactor:
    case ErrorKind::RankDeficiency:
    case ErrorKind::PenaltyRankError: return kExitNumerical;
    default: return kExitData;
  }
}

void apply_overrides(RunConfig& cfg, const Overrides& o, bool seed_is_simulation) {
  if (o.threads) cfg.model.threads = *o.threads;
  if (o.levels) cfg.model.schedule.levels = *o.levels;
  if (o.t_max) cfg.model.schedule.t_max = *o.t_max;
  if (o.schedule) {
    try {
      cfg.model.schedule.kind = schedule_kind_from_string(*o.schedule);
    } catch (const Error&) {
      throw Error(ErrorKind::ConfigError, "--schedule must be geometric, harmonic or linear, got '" + *o.schedule + "'");
    }
  }
  if (o.q_max) cfg.model.q_max = *o.q_max;
  if (o.l_max) cfg.model.l_max = *o.l_max;
  if (o.tol) cfg.model.tol = *o.tol;
  if (o.seed) (seed_is_simulation ? cfg.simulation.seed : cfg.model.seed) = *o.seed;
  if (o.jobs) cfg.replicate.jobs = *o.jobs;
  if (cfg.model.threads < 1) throw Error(ErrorKind::ConfigError, "--threads must be >= 1");
  validate(cfg);
}

std::optional<int> threads_from_env() {
  const char* v = std::getenv("FUNFACTOR_THREADS");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 4096) throw Error(ErrorKind::ConfigError, "FUNFACTOR_THREADS must be a positive integer");
  return static_cast<int>(n);
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IOError, "cannot create directory '" + dir + "': " + ec.message());
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

json lock_document(const RunConfig& cfg) {
  json lock = to_json(cfg);
  lock["rng"] = {{"algorithm", kRngAlgorithm},
                 {"simulation_seed", cfg.simulation.seed},
                 {"model_seed", cfg.model.seed},
                 {"evaluation_seed", cfg.evaluation.seed},
                 {"replicate_seeds", "splitmix64(seed, replicate)"}};
  return lock;
}

// Atomic within one filesystem, so an interrupted run never leaves a
// half-written completion marker.
void write_text_atomic(const std::string& path, const std::string& content) {
  const auto tmp = path + ".tmp";
  write_text(tmp, content);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IOError, "cannot rename '" + tmp + "': " + ec.message());
}

json metrics_json(const std::map<std::string, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = std::isfinite(v) ? json(v) : json(nullptr);
  return j;
}

std::map<std::string, double> metrics_from_json(const json& j) {
  std::map<std::string, double> m;
  for (const auto& [k, v] : j.items()) m[k] = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  return m;
}

EvaluationOptions evaluation_options(const RunConfig& cfg) {
  EvaluationOptions o;
  o.band_draws = cfg.evaluation.band_draws;
  o.level = cfg.evaluation.level;
  o.target = cfg.evaluation.target;
  o.seed = cfg.evaluation.seed;
  o.threads = cfg.model.threads;
  o.bands = cfg.evaluation.bands;
  return o;
}

}  // namespace

void cmd_simulate(const RunConfig& cfg, const std::string& out_dir) {
  const auto [data, truth] = generate_dataset(cfg.simulation);
  ensure_dir(out_dir);
  write_long_csv(data, path_in(out_dir, "data.csv"));
  write_text(path_in(out_dir, "truth.json"), truth_to_json(truth).dump(1) + "\n");
  write_text(path_in(out_dir, "config.lock.json"), lock_document(cfg).dump(2) + "\n");
}

FitSummary cmd_fit(const std::string& data_path, RunConfig cfg, const std::string& out_dir,
                   const std::vector<BandRequest>& bands) {
  auto data = validate_dataset(read_long_csv(data_path));
  for (const auto& b : bands)
    if (b.j > data.p || b.i > data.num_subjects())
      throw Error(ErrorKind::ConfigError, "--bands " + std::to_string(b.j) + "," + std::to_string(b.i) +
                                              " is outside p = " + std::to_string(data.p) +
                                              ", N = " + std::to_string(data.num_subjects()));
  cfg.model.omega.d0 = cfg.model.omega.resolved_d0(data.p);
  const auto md = build_model_data(data, cfg.model.num_penalized.value_or(0), cfg.model.threads);
  const auto out = fit(md, cfg.model);
  const auto res = summarize_fit(out.state, md.basis, cfg.model, out.trace, out.status);
  ensure_dir(out_dir);
  write_fit_artifacts(out_dir, data, out, res, bands,
                      BandSettings{cfg.evaluation.level, cfg.evaluation.band_draws, cfg.evaluation.seed});
  cfg.paths.data = data_path;
  cfg.paths.out = out_dir;
  write_text(path_in(out_dir, "config.lock.json"), lock_document(cfg).dump(2) + "\n");
  FitSummary s;
  s.status = out.status;
  s.sweeps = static_cast<int>(out.trace.size());
  s.elbo = out.trace.empty() ? 0.0 : out.trace.back().elbo;
  for (int q : res.retained) s.retained.push_back(q + 1);
  return s;
}

std::map<std::string, double> cmd_evaluate(const std::string& fit_dir, const std::string& truth_path,
                                           const RunConfig& cfg, const std::string& out_dir) {
  const auto truth = load_truth(truth_path);
  const auto lf = load_fit(fit_dir);
  if (lf.state.N != truth.config.N || lf.state.p != truth.config.p)
    throw Error(ErrorKind::MismatchError, "fit has N = " + std::to_string(lf.state.N) + ", p = " +
                                              std::to_string(lf.state.p) + " but truth has N = " +
                                              std::to_string(truth.config.N) + ", p = " + std::to_string(truth.config.p));
  if (!lf.time_map.is_identity())
    throw Error(ErrorKind::MismatchError, "fit data were rescaled in time; simulated truth lives on [0,1]");
  const auto metrics = evaluate_fit(lf.state, lf.result, truth, evaluation_options(cfg));
  ensure_dir(out_dir);
  const json doc = {{"fit", fit_dir}, {"truth", truth_path}, {"metrics", metrics_json(metrics)}};
  write_text(path_in(out_dir, "metrics.json"), doc.dump(2) + "\n");
  write_text(path_in(out_dir, "table.md"), format_table(aggregate_replicates({metrics}), cfg.replicate.scenario));
  return metrics;
}

ReplicateOutcome cmd_replicate(const RunConfig& cfg, const std::string& out_dir, bool resume) {
  const int R = cfg.replicate.replicates;
  if (R < 2) throw Error(ErrorKind::ConfigError, "field 'replicate.replicates': a replicate study needs at least 2");
  ensure_dir(out_dir);
  write_text(path_in(out_dir, "config.lock.json"), lock_document(cfg).dump(2) + "\n");

  struct Slot {
    std::uint64_t sim_seed = 0;
    std::string status = "pending";
    std::string error;
    std::map<std::string, double> metrics;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(R));
  std::atomic<int> next{0};
  std::mutex log_mutex;
  ReplicateOutcome outcome;

  const auto run_one = [&](int r) {
    auto& slot = slots[static_cast<std::size_t>(r)];
    const auto idx = static_cast<std::uint64_t>(r + 1);
    RunConfig rc = cfg;
    rc.simulation.seed = derive_seed(cfg.simulation.seed, idx);
    rc.model.seed = derive_seed(cfg.model.seed, idx);
    rc.evaluation.seed = derive_seed(cfg.evaluation.seed, idx);
    slot.sim_seed = rc.simulation.seed;
    std::ostringstream name;
    name << "rep_" << std::setw(3) << std::setfill('0') << (r + 1);
    const auto dir = path_in(out_dir, name.str());
    const auto marker = path_in(dir, "metrics.json");
    if (resume && fs::exists(marker)) {
      slot.metrics = metrics_from_json(json::parse(read_text(marker)).at("metrics"));
      slot.status = "resumed";
      return;
    }
    try {
      ensure_dir(dir);
      fs::remove(path_in(dir, "error.txt"));
      const auto [raw, truth] = generate_dataset(rc.simulation);
      const auto data = validate_dataset(raw);
      rc.model.omega.d0 = rc.model.omega.resolved_d0(data.p);
      const auto md = build_model_data(data, rc.model.num_penalized.value_or(0), rc.model.threads);
      const auto out = fit(md, rc.model);
      const auto res = summarize_fit(out.state, md.basis, rc.model, out.trace, out.status);
      slot.metrics = evaluate_fit(out.state, res, truth, evaluation_options(rc));
      slot.metrics["sweeps"] = static_cast<double>(out.trace.size());
      slot.metrics["seconds"] = out.seconds;
      write_elbo_trace(path_in(dir, "elbo_trace.csv"), out.trace);
      write_text(path_in(dir, "config.lock.json"), lock_document(rc).dump(2) + "\n");
      const json doc = {{"replicate", r + 1}, {"simulation_seed", rc.simulation.seed}, {"metrics", metrics_json(slot.metrics)}};
      write_text_atomic(marker, doc.dump(2) + "\n");
      slot.status = "ok";
    } catch (const std::exception& e) {
      slot.status = "failed";
      slot.error = e.what();
      try {
        ensure_dir(dir);
        write_text(path_in(dir, "error.txt"), slot.error + "\n");
      } catch (const std::exception&) {
      }
    }
  };

  const int jobs = std::max(1, std::min(cfg.replicate.jobs, R));
  const auto worker = [&] {
    for (int r = next++; r < R; r = next++) {
      run_one(r);
      const auto& slot = slots[static_cast<std::size_t>(r)];
      std::lock_guard lock(log_mutex);
      std::fprintf(stderr, "replicate %d/%d %s%s%s\n", r + 1, R, slot.status.c_str(), slot.error.empty() ? "" : ": ",
                   slot.error.c_str());
    }
  };
  std::vector<std::thread> pool;
  for (int k = 1; k < jobs; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<std::map<std::string, double>> done;
  for (const auto& s : slots) {
    if (s.status == "ok") ++outcome.completed;
    if (s.status == "resumed") ++outcome.skipped;
    if (s.status == "failed") ++outcome.failed;
    if (s.status != "failed") done.push_back(s.metrics);
  }

  std::vector<std::string> names;
  std::optional<ReplicateReport> report;
  if (!done.empty()) {
    report = aggregate_replicates(done);
    names = report->names;
  }
  std::string csv = "replicate,simulation_seed,status";
  for (const auto& n : names) csv += "," + n;
  csv += "\n";
  for (int r = 0; r < R; ++r) {
    const auto& s = slots[static_cast<std::size_t>(r)];
    csv += std::to_string(r + 1) + "," + std::to_string(s.sim_seed) + "," + s.status;
    for (const auto& n : names) {
      const auto it = s.metrics.find(n);
      csv += "," + (it == s.metrics.end() ? std::string() : format_double(it->second));
    }
    csv += "\n";
  }
  write_text(path_in(out_dir, "replicates.csv"), csv);

  std::ostringstream md;
  md << "# " << cfg.replicate.scenario << "\n\n";
  md << (outcome.completed + outcome.skipped) << " of " << R << " replicates succeeded";
  if (outcome.failed > 0) md << "; " << outcome.failed << " failed (see rep_NNN/error.txt)";
  md << ".\n\n";
  if (report) {
    md << format_table(*report, cfg.replicate.scenario) << "\n";
    md << "| Metric | Mean | SE | Count |\n|---|---|---|---|\n";
    for (const auto& n : names) {
      const auto& s = report->summary.at(n);
      md << "| " << n << " | " << format_double(s.mean) << " | " << format_double(s.se) << " | " << s.count << " |\n";
    }
  }
  write_text(path_in(out_dir, "report.md"), md.str());
  return outcome;
}

}  // namespace funfactor::cli

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "artifacts.hpp"
#include "commands.hpp"
#include "csv_io.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace funfactor;
using namespace funfactor::cli;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("funfactor_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Run {
  int code = -1;
  std::string output;
};

Run run_tool(const std::string& args) {
  const std::string cmd = std::string(FUNFACTOR_TOOL) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) { return read_text(p.string()); }

// Small moderate-preset study that fits in a second or two.
std::string toy_config(const fs::path& out, int replicates = 2) {
  nlohmann::json j = {
      {"schema_version", 1},
      {"simulation", {{"preset", "moderate_dense"}, {"N", 12}, {"p", 20}, {"seed", 5}}},
      {"model", {{"q_max", 3}, {"l_max", 2}, {"schedule", {{"levels", 10}}}, {"max_iter", 200}}},
      {"evaluation", {{"band_draws", 100}}},
      {"replicate", {{"replicates", replicates}, {"scenario", "toy"}}},
      {"paths", {{"out", out.string()}}},
  };
  const auto path = out.parent_path() / (out.filename().string() + ".json");
  write_text(path.string(), j.dump(2));
  return path.string();
}

std::string trace_without_seconds(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

ErrorKind config_error_kind(const std::string& text, std::string* what = nullptr) {
  try {
    parse_run_config(text, "cfg.json");
  } catch (const Error& e) {
    if (what) *what = e.what();
    return e.kind();
  }
  FAIL("expected a configuration error");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("run configuration parsing") {
  SUBCASE("defaults") {
    const auto cfg = parse_run_config(R"({"schema_version": 1})");
    CHECK(cfg.schema_version == 1);
    CHECK(cfg.model.q_max == 5);
    CHECK(cfg.model.schedule.t_max == 1.9);
    CHECK(cfg.simulation.p == 20000);
  }
  SUBCASE("preset then overrides") {
    const auto cfg = parse_run_config(R"({"schema_version": 1, "simulation": {"preset": "moderate_dense", "N": 12}})");
    CHECK(cfg.simulation.N == 12);
    CHECK(cfg.simulation.p == 100);
    CHECK(cfg.simulation.L == 3);
  }
  SUBCASE("unknown key names its field") {
    std::string what;
    CHECK(config_error_kind(R"({"schema_version": 1, "model": {"qmax": 3}})", &what) == ErrorKind::ConfigError);
    CHECK(what.find("model.qmax") != std::string::npos);
  }
  SUBCASE("wrong type names its field") {
    std::string what;
    CHECK(config_error_kind(R"({"schema_version": 1, "model": {"schedule": {"levels": "many"}}})", &what) == ErrorKind::ConfigError);
    CHECK(what.find("model.schedule.levels") != std::string::npos);
  }
  SUBCASE("syntax error gives line and column") {
    std::string what;
    CHECK(config_error_kind("{\n  \"schema_version\": 1, \"model\": {\n    \"q_max\": 3,\n  }\n}", &what) == ErrorKind::ConfigError);
    CHECK(what.find("cfg.json:4:") != std::string::npos);
  }
  SUBCASE("schema version is checked") {
    CHECK(config_error_kind(R"({"schema_version": 2})") == ErrorKind::ConfigError);
  }
  SUBCASE("invalid values are configuration errors") {
    CHECK(config_error_kind(R"({"schema_version": 1, "model": {"schedule": {"t_max": 2.5}}})") == ErrorKind::ConfigError);
    CHECK(config_error_kind(R"({"schema_version": 1, "simulation": {"preset": "huge"}})") == ErrorKind::ConfigError);
  }
  SUBCASE("written configuration reads back unchanged") {
    const auto cfg = parse_run_config(R"({"schema_version": 1, "simulation": {"preset": "large_sparse", "p": 30},
                                          "model": {"omega": {"d0": 4}, "tol": 1e-7}})");
    const auto again = parse_run_config(to_json(cfg).dump());
    CHECK(to_json(again) == to_json(cfg));
  }
}

TEST_CASE("long CSV round trip is value exact") {
  const auto dir = scratch("csv");
  auto cfg = preset_large_sparse();
  cfg.p = 7;
  cfg.N = 9;
  const auto data = validate_dataset(generate_dataset(cfg).first);
  const auto path = (dir / "data.csv").string();
  write_long_csv(data, path);
  const auto back = validate_dataset(read_long_csv(path));
  REQUIRE(back.subjects.size() == data.subjects.size());
  CHECK(back.p == data.p);
  long rows = 0;
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    CHECK(back.subjects[i].subject_id == data.subjects[i].subject_id);
    CHECK((back.subjects[i].times.array() == data.subjects[i].times.array()).all());
    CHECK((back.subjects[i].values.array() == data.subjects[i].values.array()).all());
    rows += data.subjects[i].values.size();
  }
  std::istringstream in(slurp(path));
  std::string line;
  std::getline(in, line);
  CHECK(line == "subject_id,time,variable,value");
  long n = 0;
  while (std::getline(in, line)) ++n;
  CHECK(n == rows);
}

TEST_CASE("long CSV with repeated times keeps observation rows apart") {
  const auto dir = scratch("dup");
  const auto path = (dir / "d.csv").string();
  write_text(path,
             "subject_id,time,variable,value\n"
             "a,0.5,x,1\na,0.5,y,2\na,0.5,x,3\na,0.5,y,4\nb,0.2,x,5\nb,0.2,y,6\n");
  const auto d = read_long_csv(path);
  REQUIRE(d.subjects.size() == 2);
  CHECK(d.p == 2);
  CHECK(d.subjects[0].values.rows() == 2);
  CHECK(d.subjects[0].values(0, 0) == 1.0);
  CHECK(d.subjects[0].values(1, 1) == 4.0);

  write_text(path, "subject_id,time,variable,value\na,0.5,x,1\na,0.5,y,2\nb,0.2,x,5\n");
  CHECK_THROWS_AS(read_long_csv(path), Error);
  write_text(path, "subject_id,time,variable,value\na,zero,x,1\n");
  try {
    read_long_csv(path);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("truth JSON round trip") {
  auto cfg = preset_large_sparse();
  cfg.p = 12;
  cfg.N = 6;
  cfg.seed = 3;
  const auto truth = generate_dataset(cfg).second;
  const auto back = truth_from_json(nlohmann::json::parse(truth_to_json(truth).dump()));
  CHECK(back.config.p == 12);
  CHECK((back.loadings - truth.loadings).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.support - truth.support).cwiseAbs().maxCoeff() == 0);
  CHECK((back.phases - truth.phases).cwiseAbs().maxCoeff() == 0.0);
  for (int q = 0; q < cfg.Q; ++q) {
    CHECK((back.scores[q] - truth.scores[q]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.eigenfunctions[q] - truth.eigenfunctions[q]).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK((back.mean_functions - truth.mean_functions).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("band requests") {
  const auto b = parse_band_request("3,14");
  CHECK(b.j == 3);
  CHECK(b.i == 14);
  CHECK_THROWS_AS(parse_band_request("0,1"), Error);
  CHECK_THROWS_AS(parse_band_request("1"), Error);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ErrorKind::ConfigError) == 2);
  CHECK(exit_code_for(ErrorKind::NonFiniteValue) == 3);
  CHECK(exit_code_for(ErrorKind::IOError) == 3);
  CHECK(exit_code_for(ErrorKind::MismatchError) == 3);
  CHECK(exit_code_for(ErrorKind::NumericalPD) == 4);
  CHECK(ReplicateOutcome{4, 0, 1}.too_many_failures() == false);
  CHECK(ReplicateOutcome{3, 0, 1}.too_many_failures() == true);
}

TEST_CASE("simulate is byte-for-byte reproducible") {
  const auto dir = scratch("sim");
  const auto cfg = toy_config(dir / "unused");
  REQUIRE(run_tool("simulate --config " + cfg + " --out " + (dir / "a").string()).code == 0);
  REQUIRE(run_tool("simulate --config " + cfg + " --out " + (dir / "b").string()).code == 0);
  for (const char* f : {"data.csv", "truth.json", "config.lock.json"}) {
    CHECK(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  REQUIRE(run_tool("simulate --config " + cfg + " --out " + (dir / "c").string() + " --seed 6").code == 0);
  CHECK(slurp(dir / "a" / "data.csv") != slurp(dir / "c" / "data.csv"));
}

TEST_CASE("command-line errors map to exit codes") {
  const auto dir = scratch("errors");
  write_text((dir / "bad.json").string(), R"({"schema_version": 1, "model": {"bogus": 1}})");
  auto r = run_tool("simulate --config " + (dir / "bad.json").string() + " --out " + (dir / "x").string());
  CHECK(r.code == 2);
  CHECK(r.output.find("model.bogus") != std::string::npos);
  r = run_tool("fit --data " + (dir / "missing.csv").string() + " --out " + (dir / "y").string());
  CHECK(r.code == 3);
  r = run_tool("fit --data x.csv --out y --schedule cubic");
  CHECK(r.code == 2);
  r = run_tool("");
  CHECK(r.code == 2);
}

TEST_CASE("simulate, fit and evaluate end to end") {
  const auto dir = scratch("e2e");
  const auto cfg = toy_config(dir / "run");
  REQUIRE(run_tool("simulate --config " + cfg + " --out " + (dir / "sim").string()).code == 0);
  const auto data = (dir / "sim" / "data.csv").string();
  const auto truth = (dir / "sim" / "truth.json").string();

  auto r = run_tool("fit --data " + data + " --config " + cfg + " --out " + (dir / "fit").string() + " --bands 2,3");
  INFO(r.output);
  REQUIRE(r.code == 0);
  for (const char* f : {"fit.json", "elbo_trace.csv", "scores.csv", "eigenfunctions.csv", "loadings.csv",
                        "bands_2_3.csv", "config.lock.json"})
    CHECK(fs::exists(dir / "fit" / f));
  CHECK(slurp(dir / "fit" / "elbo_trace.csv").rfind("sweep,T,elbo,seconds\n", 0) == 0);
  CHECK(slurp(dir / "fit" / "loadings.csv").rfind("j,q,gamma_star,E_b\n", 0) == 0);

  r = run_tool("evaluate --fit " + (dir / "fit").string() + " --truth " + truth);
  INFO(r.output);
  REQUIRE(r.code == 0);
  const auto metrics = nlohmann::json::parse(slurp(dir / "fit" / "metrics.json")).at("metrics");
  CHECK(metrics.contains("auc"));
  CHECK(metrics.contains("coverage"));
  const auto table = slurp(dir / "fit" / "table.md");
  for (const char* row : {"AUC", "ISE", "Coverage", "Width", "factors"}) CHECK(table.find(row) != std::string::npos);

  SUBCASE("a single temperature level runs plain coordinate ascent") {
    r = run_tool("fit --data " + data + " --config " + cfg + " --out " + (dir / "vb").string() + " --levels 1");
    REQUIRE(r.code == 0);
    const auto trace = read_elbo_trace((dir / "vb" / "elbo_trace.csv").string());
    REQUIRE(!trace.empty());
    for (const auto& rec : trace) CHECK(rec.temperature == 1.0);
    const auto lock = nlohmann::json::parse(slurp(dir / "vb" / "config.lock.json"));
    CHECK(lock["model"]["schedule"]["levels"] == 1);
  }
  SUBCASE("thread count does not change the trace") {
    REQUIRE(run_tool("fit --data " + data + " --config " + cfg + " --out " + (dir / "t2").string() + " --threads 2")
                .code == 0);
    CHECK(trace_without_seconds(dir / "t2" / "elbo_trace.csv") == trace_without_seconds(dir / "fit" / "elbo_trace.csv"));
  }
  SUBCASE("the environment supplies a default thread count") {
    ::setenv("FUNFACTOR_THREADS", "3", 1);
    REQUIRE(run_tool("fit --data " + data + " --config " + cfg + " --out " + (dir / "env").string()).code == 0);
    ::unsetenv("FUNFACTOR_THREADS");
    const auto lock = nlohmann::json::parse(slurp(dir / "env" / "config.lock.json"));
    CHECK(lock["model"]["threads"] == 3);
    CHECK(trace_without_seconds(dir / "env" / "elbo_trace.csv") == trace_without_seconds(dir / "fit" / "elbo_trace.csv"));
  }
  SUBCASE("truth from a different design is rejected") {
    auto other = parse_run_config(slurp(cfg));
    other.simulation.p = 21;
    cmd_simulate(other, (dir / "other").string());
    r = run_tool("evaluate --fit " + (dir / "fit").string() + " --truth " + (dir / "other" / "truth.json").string() +
                 " --out " + (dir / "mm").string());
    CHECK(r.code == 3);
    CHECK(r.output.find("MismatchError") != std::string::npos);
  }
  SUBCASE("missing truth file") {
    r = run_tool("evaluate --fit " + (dir / "fit").string() + " --truth " + (dir / "nope.json").string());
    CHECK(r.code == 3);
  }
}

TEST_CASE("an almost noiseless fit recovers the truth") {
  const auto dir = scratch("clean");
  auto cfg = parse_run_config(R"({"schema_version": 1, "simulation": {"preset": "large_sparse", "N": 60, "p": 30, "Q": 2,
                                                  "noise_sd": 0.05, "seed": 2},
                                   "model": {"q_max": 3, "l_max": 3, "schedule": {"levels": 20}},
                                   "evaluation": {"band_draws": 100}})");
  cmd_simulate(cfg, (dir / "sim").string());
  cmd_fit((dir / "sim" / "data.csv").string(), cfg, (dir / "fit").string());
  const auto m = cmd_evaluate((dir / "fit").string(), (dir / "sim" / "truth.json").string(), cfg,
                              (dir / "fit").string());
  INFO("auc " << m.at("auc") << " ise_mean " << m.at("ise_mean"));
  CHECK(m.at("auc") == 1.0);
  CHECK(m.at("ise_mean") < 0.01);
}

TEST_CASE("replicate study with resume") {
  const auto dir = scratch("rep");
  const auto cfg = toy_config(dir / "study");
  auto r = run_tool("replicate --config " + cfg);
  INFO(r.output);
  REQUIRE(r.code == 0);
  const auto csv = slurp(dir / "study" / "replicates.csv");
  const auto report = slurp(dir / "study" / "report.md");
  CHECK(report.find("2 of 2 replicates succeeded") != std::string::npos);
  CHECK(report.find("AUC") != std::string::npos);
  CHECK(fs::exists(dir / "study" / "rep_001" / "metrics.json"));
  CHECK(fs::exists(dir / "study" / "rep_002" / "elbo_trace.csv"));

  r = run_tool("replicate --config " + cfg + " --resume");
  REQUIRE(r.code == 0);
  CHECK(r.output.find("0 run, 2 resumed") != std::string::npos);
  // Resumed rows carry the same metrics; only the status column changes.
  std::string resumed = slurp(dir / "study" / "replicates.csv");
  for (std::size_t pos; (pos = resumed.find(",resumed,")) != std::string::npos;) resumed.replace(pos, 9, ",ok,");
  CHECK(resumed == csv);

  // Removing one replicate's metrics reruns just that one.
  fs::remove(dir / "study" / "rep_002" / "metrics.json");
  r = run_tool("replicate --config " + cfg + " --resume");
  CHECK(r.output.find("1 run, 1 resumed") != std::string::npos);

  write_text((dir / "one.json").string(), R"({"schema_version": 1, "replicate": {"replicates": 1}})");
  CHECK(run_tool("replicate --config " + (dir / "one.json").string() + " --out " + (dir / "one").string()).code == 2);
}

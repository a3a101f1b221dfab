#include "run_config.hpp"

#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include "funfactor/error.hpp"

namespace funfactor::cli {

namespace {

using nlohmann::json;

struct FieldError {
  std::string message;
};

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw FieldError{"field '" + field + "': " + what};
}

// Reads the keys of one JSON object and remembers which were consumed, so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, int& out) {
    if (const auto* v = get(key)) out = as_int(*v, field(key));
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (const auto* v = get(key)) {
      if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<long long>() < 0))
        fail(field(key), "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void read(const std::string& key, double& out) {
    if (const auto* v = get(key)) out = as_double(*v, field(key));
  }
  void read(const std::string& key, bool& out) {
    if (const auto* v = get(key)) {
      if (!v->is_boolean()) fail(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const auto* v = get(key)) out = as_string(*v, field(key));
  }
  void read(const std::string& key, std::optional<double>& out) {
    if (const auto* v = get(key)) out = v->is_null() ? std::nullopt : std::optional<double>(as_double(*v, field(key)));
  }
  void read(const std::string& key, std::optional<int>& out) {
    if (const auto* v = get(key)) out = v->is_null() ? std::nullopt : std::optional<int>(as_int(*v, field(key)));
  }
  void read(const std::string& key, std::vector<int>& out) {
    if (const auto* v = get(key)) {
      if (!v->is_array()) fail(field(key), "expected an array of integers");
      out.clear();
      for (std::size_t k = 0; k < v->size(); ++k) out.push_back(as_int((*v)[k], field(key) + "[" + std::to_string(k) + "]"));
    }
  }
  template <class Enum, class Parse>
  void read_enum(const std::string& key, Enum& out, Parse parse) {
    if (const auto* v = get(key)) {
      const auto name = as_string(*v, field(key));
      try {
        out = parse(name);
      } catch (const Error&) {
        fail(field(key), "unknown value '" + name + "'");
      }
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) fail(field(key), "unknown key");
  }

  static int as_int(const json& v, const std::string& f) {
    if (!v.is_number_integer()) fail(f, "expected an integer");
    const auto x = v.get<long long>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) fail(f, "integer out of range");
    return static_cast<int>(x);
  }
  static double as_double(const json& v, const std::string& f) {
    if (!v.is_number()) fail(f, "expected a number");
    return v.get<double>();
  }
  static std::string as_string(const json& v, const std::string& f) {
    if (!v.is_string()) fail(f, "expected a string");
    return v.get<std::string>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

SimConfig preset_by_name(const std::string& name, const std::string& field) {
  if (name == "large_sparse") return preset_large_sparse();
  if (name == "moderate_dense") return preset_moderate_dense();
  fail(field, "unknown preset '" + name + "' (expected large_sparse or moderate_dense)");
}

SimConfig read_sim(const json& j, SimConfig cfg, const std::string& where, std::string* preset) {
  Section s(j, where);
  if (const auto* v = s.get("preset")) {
    const auto name = Section::as_string(*v, s.field("preset"));
    cfg = preset_by_name(name, s.field("preset"));
    if (preset) *preset = name;
  }
  s.read("N", cfg.N);
  s.read("p", cfg.p);
  s.read("Q", cfg.Q);
  s.read("L", cfg.L);
  s.read("n_min", cfg.n_min);
  s.read("n_max", cfg.n_max);
  if (const auto* v = s.get("sparsity")) {
    if (v->is_string()) {
      if (v->get<std::string>() != "dense") fail(s.field("sparsity"), "expected \"dense\" or {\"a\": .., \"b\": ..}");
      cfg.sparsity.dense = true;
    } else {
      Section sp(*v, s.field("sparsity"));
      sp.read("dense", cfg.sparsity.dense);
      sp.read("a", cfg.sparsity.a);
      sp.read("b", cfg.sparsity.b);
      sp.finish();
    }
  }
  s.read_enum("mean_kind", cfg.mean_kind, mean_kind_from_string);
  s.read("noise_sd", cfg.noise_sd);
  s.read("eigen_degrees", cfg.eigen_degrees);
  s.read("eigen_interior_knots", cfg.eigen_interior_knots);
  s.read("grid_size", cfg.grid_size);
  s.read("seed", cfg.seed);
  s.read("keep_noise", cfg.keep_noise);
  s.finish();
  return cfg;
}

Hyperparameters read_model(const json& j, Hyperparameters h, const std::string& where) {
  Section s(j, where);
  s.read("q_max", h.q_max);
  s.read("l_max", h.l_max);
  s.read("half_cauchy_scale", h.half_cauchy_scale);
  s.read("sigma_beta", h.sigma_beta);
  if (const auto* v = s.get("omega")) {
    Section o(*v, s.field("omega"));
    o.read("c0", h.omega.c0);
    o.read("d0", h.omega.d0);
    o.finish();
  }
  if (const auto* v = s.get("schedule")) {
    Section o(*v, s.field("schedule"));
    o.read_enum("kind", h.schedule.kind, schedule_kind_from_string);
    o.read("t_max", h.schedule.t_max);
    o.read("levels", h.schedule.levels);
    o.finish();
  }
  s.read("tol", h.tol);
  s.read("max_iter", h.max_iter);
  s.read("sweeps_per_temperature", h.sweeps_per_temperature);
  s.read("dense_grid_size", h.dense_grid_size);
  s.read("seed", h.seed);
  s.read("threads", h.threads);
  s.read_enum("init", h.init, init_kind_from_string);
  s.read("warmup_passes", h.warmup_passes);
  s.read("num_penalized", h.num_penalized);
  s.read("freeze_loadings", h.freeze_loadings);
  s.read("fixed_noise_variance", h.fixed_noise_variance);
  s.read("fixed_mean_smoothing", h.fixed_mean_smoothing);
  s.read("fixed_eigen_smoothing", h.fixed_eigen_smoothing);
  s.finish();
  return h;
}

std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

SimConfig sim_config_from_json(const json& j, SimConfig base, const std::string& where) {
  try {
    return read_sim(j, std::move(base), where, nullptr);
  } catch (const FieldError& e) {
    throw Error(ErrorKind::ConfigError, e.message);
  }
}

Hyperparameters hyperparameters_from_json(const json& j, Hyperparameters base, const std::string& where) {
  try {
    return read_model(j, std::move(base), where);
  } catch (const FieldError& e) {
    throw Error(ErrorKind::ConfigError, e.message);
  }
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(ErrorKind::ConfigError,
                source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON: " + e.what());
  }
  RunConfig cfg;
  try {
    Section root(doc, "");
    const auto* version = root.get("schema_version");
    if (!version) fail("schema_version", "missing");
    cfg.schema_version = Section::as_int(*version, "schema_version");
    if (cfg.schema_version != kSchemaVersion)
      fail("schema_version", "unsupported version " + std::to_string(cfg.schema_version) + " (expected " +
                                 std::to_string(kSchemaVersion) + ")");
    if (const auto* v = root.get("simulation")) cfg.simulation = read_sim(*v, cfg.simulation, "simulation", &cfg.preset);
    if (const auto* v = root.get("model")) cfg.model = read_model(*v, cfg.model, "model");
    if (const auto* v = root.get("evaluation")) {
      Section s(*v, "evaluation");
      s.read("band_draws", cfg.evaluation.band_draws);
      s.read("level", cfg.evaluation.level);
      s.read_enum("coverage_target", cfg.evaluation.target, coverage_target_from_string);
      s.read("seed", cfg.evaluation.seed);
      s.read("bands", cfg.evaluation.bands);
      s.finish();
    }
    if (const auto* v = root.get("replicate")) {
      Section s(*v, "replicate");
      s.read("replicates", cfg.replicate.replicates);
      s.read("jobs", cfg.replicate.jobs);
      s.read("scenario", cfg.replicate.scenario);
      s.finish();
    }
    if (const auto* v = root.get("paths")) {
      Section s(*v, "paths");
      s.read("data", cfg.paths.data);
      s.read("truth", cfg.paths.truth);
      s.read("out", cfg.paths.out);
      s.finish();
    }
    // Written by lock files for the record; not an input.
    if (const auto* v = root.get("rng"); v && !v->is_object()) fail("rng", "expected an object");
    root.finish();
  } catch (const FieldError& e) {
    throw Error(ErrorKind::ConfigError, source + ": " + e.message);
  }
  try {
    validate(cfg);
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, source + ": " + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IOError, "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

void validate(const RunConfig& cfg) {
  try {
    funfactor::validate(cfg.simulation);
    funfactor::validate(cfg.model);
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  if (cfg.evaluation.band_draws < 2) throw Error(ErrorKind::ConfigError, "evaluation.band_draws must be >= 2");
  if (!(cfg.evaluation.level > 0.0 && cfg.evaluation.level < 1.0))
    throw Error(ErrorKind::ConfigError, "evaluation.level must lie in (0, 1)");
  if (cfg.replicate.replicates < 1) throw Error(ErrorKind::ConfigError, "replicate.replicates must be >= 1");
  if (cfg.replicate.jobs < 1) throw Error(ErrorKind::ConfigError, "replicate.jobs must be >= 1");
}

json to_json(const SimConfig& c) {
  return json{{"N", c.N},
              {"p", c.p},
              {"Q", c.Q},
              {"L", c.L},
              {"n_min", c.n_min},
              {"n_max", c.n_max},
              {"sparsity", {{"dense", c.sparsity.dense}, {"a", c.sparsity.a}, {"b", c.sparsity.b}}},
              {"mean_kind", to_string(c.mean_kind)},
              {"noise_sd", c.noise_sd},
              {"eigen_degrees", c.eigen_degrees},
              {"eigen_interior_knots", c.eigen_interior_knots},
              {"grid_size", c.grid_size},
              {"seed", c.seed},
              {"keep_noise", c.keep_noise}};
}

json to_json(const Hyperparameters& h) {
  return json{{"q_max", h.q_max},
              {"l_max", h.l_max},
              {"half_cauchy_scale", h.half_cauchy_scale},
              {"sigma_beta", h.sigma_beta},
              {"omega", {{"c0", h.omega.c0}, {"d0", optional_json(h.omega.d0)}}},
              {"schedule", {{"kind", to_string(h.schedule.kind)}, {"t_max", h.schedule.t_max}, {"levels", h.schedule.levels}}},
              {"tol", h.tol},
              {"max_iter", h.max_iter},
              {"sweeps_per_temperature", h.sweeps_per_temperature},
              {"dense_grid_size", h.dense_grid_size},
              {"seed", h.seed},
              {"threads", h.threads},
              {"init", to_string(h.init)},
              {"warmup_passes", h.warmup_passes},
              {"num_penalized", h.num_penalized ? json(*h.num_penalized) : json(nullptr)},
              {"freeze_loadings", h.freeze_loadings},
              {"fixed_noise_variance", optional_json(h.fixed_noise_variance)},
              {"fixed_mean_smoothing", optional_json(h.fixed_mean_smoothing)},
              {"fixed_eigen_smoothing", optional_json(h.fixed_eigen_smoothing)}};
}

json to_json(const RunConfig& cfg) {
  json sim = to_json(cfg.simulation);
  if (!cfg.preset.empty()) sim["preset"] = cfg.preset;
  return json{{"schema_version", cfg.schema_version},
              {"simulation", sim},
              {"model", to_json(cfg.model)},
              {"evaluation",
               {{"band_draws", cfg.evaluation.band_draws},
                {"level", cfg.evaluation.level},
                {"coverage_target", to_string(cfg.evaluation.target)},
                {"seed", cfg.evaluation.seed},
                {"bands", cfg.evaluation.bands}}},
              {"replicate",
               {{"replicates", cfg.replicate.replicates},
                {"jobs", cfg.replicate.jobs},
                {"scenario", cfg.replicate.scenario}}},
              {"paths", {{"data", cfg.paths.data}, {"truth", cfg.paths.truth}, {"out", cfg.paths.out}}}};
}

}  // namespace funfactor::cli

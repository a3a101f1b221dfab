#include "artifacts.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "csv_io.hpp"
#include "funfactor/error.hpp"
#include "run_config.hpp"

namespace funfactor::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Column-major: one array per column.
json mat_json(const Eigen::MatrixXd& m) {
  json cols = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) cols.push_back(vec_json(m.col(c)));
  return cols;
}

Eigen::MatrixXd json_mat(const json& j, Eigen::Index rows) {
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) {
    const auto col = json_vec(j[c]);
    if (col.size() != rows) throw Error(ErrorKind::DimensionMismatch, "column length mismatch");
    m.col(static_cast<Eigen::Index>(c)) = col;
  }
  return m;
}

std::string fit_status_name(FitStatus s) { return to_string(s); }

FitStatus fit_status_from(const std::string& s) {
  if (s == to_string(FitStatus::converged)) return FitStatus::converged;
  if (s == to_string(FitStatus::max_iter_exceeded)) return FitStatus::max_iter_exceeded;
  throw Error(ErrorKind::InvalidArgument, "unknown fit status '" + s + "'");
}

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

}  // namespace

json truth_to_json(const SimTruth& t) {
  const auto& c = t.config;
  json factors = json::array();
  for (int q = 0; q < c.Q; ++q) {
    const auto qq = static_cast<std::size_t>(q);
    const auto& es = t.eigen_sets[qq];
    json knots = json::array(), coefs = json::array();
    for (const auto& k : es.knot_vectors) knots.push_back(vec_json(k));
    for (const auto& k : es.coefficients) coefs.push_back(vec_json(k));
    std::vector<int> active;
    for (int j = 0; j < c.p; ++j)
      if (t.support(j, q)) active.push_back(j + 1);
    factors.push_back({{"inclusion_prob", t.inclusion_probs[q]},
                       {"active", active},
                       {"loadings", vec_json(t.loadings.col(q))},
                       {"eigen_basis",
                        {{"degrees", es.degrees}, {"knot_vectors", knots}, {"coefficients", coefs}, {"mixing", mat_json(es.mixing)}}},
                       {"eigenfunctions", mat_json(t.eigenfunctions[qq])},
                       {"scores", mat_json(t.scores[qq])}});
  }
  json times = json::array();
  for (const auto& ti : t.times) times.push_back(vec_json(ti));
  return json{{"schema_version", kSchemaVersion},
              {"config", to_json(c)},
              {"rng", {{"algorithm", kRngAlgorithm}, {"seed", c.seed}}},
              {"grid", vec_json(t.grid)},
              {"factors", factors},
              {"phases", vec_json(t.phases)},
              {"times", times}};
}

SimTruth truth_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion)
      throw Error(ErrorKind::MismatchError, "unsupported truth schema version");
    SimTruth t;
    t.config = sim_config_from_json(j.at("config"), SimConfig{}, "config");
    const auto& c = t.config;
    t.grid = json_vec(j.at("grid"));
    if (t.grid.size() != c.grid_size) throw Error(ErrorKind::DimensionMismatch, "grid length differs from grid_size");
    const auto& factors = j.at("factors");
    if (static_cast<int>(factors.size()) != c.Q) throw Error(ErrorKind::DimensionMismatch, "factor count differs from Q");
    t.inclusion_probs.resize(c.Q);
    t.support = Eigen::MatrixXi::Zero(c.p, c.Q);
    t.loadings.resize(c.p, c.Q);
    for (int q = 0; q < c.Q; ++q) {
      const auto& f = factors[static_cast<std::size_t>(q)];
      t.inclusion_probs[q] = f.at("inclusion_prob").get<double>();
      for (int a : f.at("active").get<std::vector<int>>()) {
        if (a < 1 || a > c.p) throw Error(ErrorKind::DimensionMismatch, "active index out of range");
        t.support(a - 1, q) = 1;
      }
      const auto b = json_vec(f.at("loadings"));
      if (b.size() != c.p) throw Error(ErrorKind::DimensionMismatch, "loadings length differs from p");
      t.loadings.col(q) = b;
      const auto& eb = f.at("eigen_basis");
      EigenfunctionSet es;
      es.degrees = eb.at("degrees").get<std::vector<int>>();
      for (const auto& k : eb.at("knot_vectors")) es.knot_vectors.push_back(json_vec(k));
      for (const auto& k : eb.at("coefficients")) es.coefficients.push_back(json_vec(k));
      es.mixing = json_mat(eb.at("mixing"), c.L);
      if (es.size() != c.L || es.mixing.cols() != c.L) throw Error(ErrorKind::DimensionMismatch, "eigen basis size differs from L");
      t.eigenfunctions.push_back(es.evaluate(t.grid));
      t.eigen_sets.push_back(std::move(es));
      t.scores.push_back(json_mat(f.at("scores"), c.N));
    }
    t.phases = json_vec(j.at("phases"));
    if (t.phases.size() != c.p) throw Error(ErrorKind::DimensionMismatch, "phases length differs from p");
    t.mean_functions.resize(c.grid_size, c.p);
    for (int jj = 0; jj < c.p; ++jj)
      for (int g = 0; g < c.grid_size; ++g) t.mean_functions(g, jj) = t.mean_value(jj, t.grid[g]);
    for (const auto& ti : j.at("times")) t.times.push_back(json_vec(ti));
    if (static_cast<int>(t.times.size()) != c.N) throw Error(ErrorKind::DimensionMismatch, "subject count differs from N");
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::IOError, std::string("malformed truth document: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw Error(ErrorKind::IOError, std::string("malformed truth document: ") + e.what());
    throw;
  }
}

SimTruth load_truth(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::IOError, path + ": " + e.what());
  }
  return truth_from_json(j);
}

BandRequest parse_band_request(const std::string& text) {
  const auto comma = text.find(',');
  BandRequest r;
  const auto parse = [&](std::string_view s, int& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && out >= 1;
  };
  if (comma == std::string::npos || !parse(std::string_view(text).substr(0, comma), r.j) ||
      !parse(std::string_view(text).substr(comma + 1), r.i))
    throw Error(ErrorKind::ConfigError, "--bands expects 'j,i' with 1-based indices, got '" + text + "'");
  return r;
}

void write_elbo_trace(const std::string& path, const std::vector<ElboRecord>& trace) {
  std::string s = "sweep,T,elbo,seconds\n";
  for (const auto& r : trace)
    s += std::to_string(r.sweep) + "," + format_double(r.temperature) + "," + format_double(r.elbo) + "," +
         format_double(r.seconds) + "\n";
  write_text(path, s);
}

std::vector<ElboRecord> read_elbo_trace(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  std::vector<ElboRecord> trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ElboRecord r;
    char c1, c2, c3;
    std::istringstream ls(line);
    if (!(ls >> r.sweep >> c1 >> r.temperature >> c2 >> r.elbo >> c3 >> r.seconds))
      throw Error(ErrorKind::IOError, path + ": malformed trace row '" + line + "'");
    trace.push_back(r);
  }
  return trace;
}

void write_fit_artifacts(const std::string& dir, const LongitudinalDataset& data, const FitOutput& out,
                         const FitResult& res, const std::vector<BandRequest>& bands, const BandSettings& settings) {
  const fs::path d(dir);
  const auto& st = out.state;
  const auto to_user = [&](double u) { return data.time_map.to_original(u); };
  const auto var_name = [&](int j) {
    return static_cast<int>(data.variable_names.size()) == data.p ? data.variable_names[static_cast<std::size_t>(j)]
                                                                   : std::to_string(j + 1);
  };

  json factors = json::array();
  std::vector<int> retained;
  for (const auto& f : res.factors) {
    factors.push_back({{"factor", f.factor + 1},
                       {"ppi", f.ppi},
                       {"retained", f.retained},
                       {"degenerate", f.degenerate},
                       {"num_components", f.num_components},
                       {"eigenvalues", vec_json(f.eigenvalues)},
                       {"pve", vec_json(f.pve)}});
  }
  for (int q : res.retained) retained.push_back(q + 1);
  std::vector<std::string> subjects, variables;
  for (const auto& s : data.subjects) subjects.push_back(s.subject_id);
  for (int j = 0; j < data.p; ++j) variables.push_back(var_name(j));
  const json fit = {{"schema_version", kSchemaVersion},
                    {"status", fit_status_name(out.status)},
                    {"sweeps", out.trace.size()},
                    {"unit_temperature_sweeps", out.unit_temperature_sweeps},
                    {"final_elbo", out.trace.empty() ? 0.0 : out.trace.back().elbo},
                    {"seconds", out.seconds},
                    {"N", st.N},
                    {"p", st.p},
                    {"subjects", subjects},
                    {"variables", variables},
                    {"time_map", {{"offset", data.time_map.offset}, {"scale", data.time_map.scale}}},
                    {"basis",
                     {{"degree", res.basis.degree},
                      {"num_penalized", res.basis.num_penalized},
                      {"interior_knots", vec_json(res.basis.interior_knots)}}},
                    {"hyperparameters", to_json(res.hyper)},
                    {"grid", vec_json(res.grid)},
                    {"factors", factors},
                    {"retained", retained},
                    {"noise_variance", vec_json(res.noise_variance)}};
  write_text(join(d, "fit.json"), fit.dump(2) + "\n");
  write_elbo_trace(join(d, "elbo_trace.csv"), out.trace);

  {
    std::string s = "subject_id,factor,component,score\n";
    for (int q : res.retained) {
      const auto& f = res.factors[static_cast<std::size_t>(q)];
      for (int i = 0; i < st.N; ++i)
        for (int l = 0; l < f.num_components; ++l)
          s += subjects[static_cast<std::size_t>(i)] + "," + std::to_string(q + 1) + "," + std::to_string(l + 1) + "," +
               format_double(f.scores(i, l)) + "\n";
    }
    write_text(join(d, "scores.csv"), s);
  }
  {
    std::string s = "factor,component,t,value\n";
    for (int q : res.retained) {
      const auto& f = res.factors[static_cast<std::size_t>(q)];
      for (int l = 0; l < f.num_components; ++l)
        for (Eigen::Index g = 0; g < res.grid.size(); ++g)
          s += std::to_string(q + 1) + "," + std::to_string(l + 1) + "," + format_double(to_user(res.grid[g])) + "," +
               format_double(f.eigenfunctions(g, l)) + "\n";
    }
    write_text(join(d, "eigenfunctions.csv"), s);
  }
  {
    TextFile f(join(d, "loadings.csv"));
    std::string s = "j,q,gamma_star,E_b\n";
    for (int j = 0; j < st.p; ++j)
      for (int q = 0; q < st.Q; ++q)
        s += std::to_string(j + 1) + "," + std::to_string(q + 1) + "," + format_double(res.gamma(j, q)) + "," +
             format_double(res.loading_mean(j, q)) + "\n";
    f.write(s);
    f.close();
  }
  {
    TextFile f(join(d, "mean_functions.csv"));
    std::string s = "variable,t,value\n";
    for (int j = 0; j < st.p; ++j) {
      const auto name = var_name(j);
      for (Eigen::Index g = 0; g < res.grid.size(); ++g)
        s += name + "," + format_double(to_user(res.grid[g])) + "," + format_double(res.mean_functions(g, j)) + "\n";
      if (s.size() > (1u << 20)) {
        f.write(s);
        s.clear();
      }
    }
    f.write(s);
    f.close();
  }
  {
    std::ofstream bin(join(d, "state.bin"), std::ios::binary);
    if (!bin) throw Error(ErrorKind::IOError, "cannot write state.bin in '" + dir + "'");
    save_state(st, bin);
    if (!bin) throw Error(ErrorKind::IOError, "write failed on state.bin");
  }
  for (const auto& b : bands) {
    if (b.j > st.p || b.i > st.N)
      throw Error(ErrorKind::InvalidArgument, "--bands " + std::to_string(b.j) + "," + std::to_string(b.i) +
                                                  " is outside p = " + std::to_string(st.p) +
                                                  ", N = " + std::to_string(st.N));
    const auto tb = predict_trajectory_bands(st, res.basis, b.j - 1, b.i - 1, res.grid, settings.level, settings.draws,
                                             settings.seed);
    std::string s = "t,mean,lower,upper\n";
    for (Eigen::Index g = 0; g < tb.grid.size(); ++g)
      s += format_double(to_user(tb.grid[g])) + "," + format_double(tb.mean[g]) + "," + format_double(tb.lower[g]) + "," +
           format_double(tb.upper[g]) + "\n";
    write_text(join(d, "bands_" + std::to_string(b.j) + "_" + std::to_string(b.i) + ".csv"), s);
  }
}

LoadedFit load_fit(const std::string& dir) {
  const fs::path d(dir);
  json fit;
  try {
    fit = json::parse(read_text(join(d, "fit.json")));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::IOError, join(d, "fit.json") + ": " + e.what());
  }
  LoadedFit lf;
  try {
    const auto hyper = hyperparameters_from_json(fit.at("hyperparameters"), Hyperparameters{}, "hyperparameters");
    const auto basis = make_spline_basis(json_vec(fit.at("basis").at("interior_knots")),
                                         fit.at("basis").at("degree").get<int>());
    const auto status = fit_status_from(fit.at("status").get<std::string>());
    lf.time_map.offset = fit.at("time_map").at("offset").get<double>();
    lf.time_map.scale = fit.at("time_map").at("scale").get<double>();
    lf.subject_ids = fit.at("subjects").get<std::vector<std::string>>();
    std::ifstream bin(join(d, "state.bin"), std::ios::binary);
    if (!bin) throw Error(ErrorKind::IOError, "cannot open state.bin in '" + dir + "'");
    lf.state = load_state(bin);
    if (lf.state.N != fit.at("N").get<int>() || lf.state.p != fit.at("p").get<int>())
      throw Error(ErrorKind::MismatchError, "state.bin does not match fit.json in '" + dir + "'");
    lf.result = summarize_fit(lf.state, basis, hyper, read_elbo_trace(join(d, "elbo_trace.csv")), status);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::IOError, join(d, "fit.json") + ": " + e.what());
  }
  return lf;
}

}  // namespace funfactor::cli

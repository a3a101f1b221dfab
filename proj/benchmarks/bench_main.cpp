#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "funfactor/elbo.hpp"
#include "funfactor/model_data.hpp"
#include "funfactor/postprocess.hpp"
#include "funfactor/simulate.hpp"
#include "funfactor/splines.hpp"
#include "funfactor/updates.hpp"

using namespace funfactor;

namespace {

struct Instance {
  LongitudinalDataset data;
  ModelData md;
  Hyperparameters hyper;
  VariationalState state;
};

std::unique_ptr<Instance> make_instance(int p, int N, int threads) {
  auto cfg = preset_large_sparse();
  cfg.p = p;
  cfg.N = N;
  cfg.seed = 11;
  auto inst = std::make_unique<Instance>();
  inst->data = validate_dataset(generate_dataset(cfg).first);
  inst->hyper.threads = threads;
  inst->md = build_model_data(inst->data, 0, threads);
  inst->state = init_state(inst->md, inst->hyper, 1);
  return inst;
}

void BM_SplineDesign(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(3, 0);
  std::vector<double> pooled(static_cast<std::size_t>(n));
  for (auto& t : pooled) t = rng.uniform();
  const auto basis = make_spline_basis_for_times(pooled);
  const Eigen::VectorXd times = Eigen::VectorXd::Map(pooled.data(), n);
  for (auto _ : state) benchmark::DoNotOptimize(build_design(times, basis));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SplineDesign)->Arg(100)->Arg(1000)->Arg(10000);

void BM_Sweep(benchmark::State& state) {
  auto inst = make_instance(static_cast<int>(state.range(0)), 100, static_cast<int>(state.range(1)));
  CaviEngine engine(inst->md, inst->hyper, inst->state);
  for (auto _ : state) engine.sweep(1.0);
  state.counters["p"] = static_cast<double>(state.range(0));
}
BENCHMARK(BM_Sweep)->Args({500, 1})->Args({2000, 1})->Args({2000, 4})->Unit(benchmark::kMillisecond);

void BM_Elbo(benchmark::State& state) {
  auto inst = make_instance(static_cast<int>(state.range(0)), 100, 1);
  for (auto _ : state) benchmark::DoNotOptimize(compute_elbo(inst->md, inst->state, inst->hyper));
}
BENCHMARK(BM_Elbo)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Bands(benchmark::State& state) {
  auto inst = make_instance(100, 30, 1);
  const auto grid = uniform_grid(100);
  const int draws = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(predict_trajectory_bands(inst->state, inst->md.basis, 0, 0, grid, 0.95, draws, 5));
}
BENCHMARK(BM_Bands)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include "funfactor/fit.hpp"

#include <chrono>
#include <cmath>

#include "funfactor/schedule.hpp"
#include "funfactor/updates.hpp"

namespace funfactor {

std::string to_string(FitStatus status) {
  return status == FitStatus::converged ? "converged" : "max_iter_exceeded";
}

FitOutput fit(const ModelData& data, const Hyperparameters& hyper, const FitCallback& on_sweep) {
  validate(hyper);
  return fit_from(data, hyper, init_state(data, hyper, hyper.seed), on_sweep);
}

FitOutput fit_from(const ModelData& data, const Hyperparameters& hyper, VariationalState init,
                   const FitCallback& on_sweep) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  FitOutput out;
  out.state = std::move(init);
  CaviEngine engine(data, hyper, out.state);
  const auto temps = make_schedule(hyper.schedule);

  int sweep = 0;
  const auto run = [&](double temperature) {
    const double c = 1.0 / temperature;
    engine.sweep(c);
    const auto terms = compute_elbo_terms(data, out.state, hyper);
    ElboRecord rec;
    rec.sweep = ++sweep;
    rec.temperature = temperature;
    rec.heated = terms.heated(temperature);
    rec.elbo = terms.value();
    rec.seconds = std::chrono::duration<double>(clock::now() - start).count();
    out.trace.push_back(rec);
    if (on_sweep) on_sweep(rec);
    return rec.elbo;
  };

  for (std::size_t k = 0; k + 1 < temps.size(); ++k)
    for (int s = 0; s < hyper.sweeps_per_temperature; ++s) run(temps[k]);

  out.status = FitStatus::max_iter_exceeded;
  double prev = run(1.0);
  out.unit_temperature_sweeps = 1;
  while (out.unit_temperature_sweeps < hyper.max_iter) {
    const double cur = run(1.0);
    ++out.unit_temperature_sweeps;
    if (std::abs(cur - prev) <= hyper.tol * std::abs(cur)) {
      out.status = FitStatus::converged;
      break;
    }
    prev = cur;
  }
  out.seconds = std::chrono::duration<double>(clock::now() - start).count();
  return out;
}

}  // namespace funfactor

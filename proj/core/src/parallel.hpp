#pragma once

#include <exception>
#include <mutex>

namespace funfactor::detail {

/// Static-schedule parallel loop over [0, n). Each index is handled by one
/// thread, so per-index writes are deterministic for any thread count. The
/// first exception thrown by a body is rethrown on the calling thread.
template <class F>
void parallel_for(int n, int threads, F&& body) {
  std::exception_ptr error;
  std::mutex mu;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads > 0 ? threads : 1) if (threads > 1 && n > 1)
#endif
  for (int k = 0; k < n; ++k) {
    try {
      body(k);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace funfactor::detail

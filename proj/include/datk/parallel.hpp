#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>

namespace datk {

// OpenMP parallel loop over [0, n) that captures the first exception and
// rethrows it after the region joins; exceptions must not cross an OpenMP
// boundary. Results must be written to per-index slots by the body.
template <class Fn>
void parallel_for_indexed(int64_t n, int jobs, Fn&& body) {
  std::exception_ptr err;
  std::mutex err_mu;
  if (jobs <= 1) {
    for (int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (int64_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mu);
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace datk

#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace iwatsuka {

inline void set_thread_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Runs f(i) for i in [0, n). Iterations must write disjoint outputs. The first
// exception thrown by any iteration is rethrown on the calling thread.
template <class F>
void parallel_for(std::size_t n, F&& f) {
  std::exception_ptr failure;
  std::mutex guard;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(n); ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace iwatsuka

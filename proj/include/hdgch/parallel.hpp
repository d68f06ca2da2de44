#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace hdgch {

/// Runs fn(i) for i in [0, n) on up to `threads` workers in contiguous
/// chunks. Callers write results into per-index slots, so the outcome does not
/// depend on the thread count. The first exception thrown is rethrown.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      const int begin = t * chunk, end = std::min(n, begin + chunk);
      try {
        for (int i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace hdgch

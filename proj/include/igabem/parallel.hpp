#pragma once

#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace igabem {

inline int num_threads() {
  if (const char* env = std::getenv("IGABEM_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Static contiguous partition of [0, n); results must be written to
/// disjoint slots so the outcome is independent of the thread count.
template <class F>
void parallel_for(int64_t n, F&& body) {
  const int threads = num_threads();
  if (n <= 0) return;
  if (threads == 1 || n < 64) {
    for (int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const int64_t chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    int64_t lo = t * chunk;
    int64_t hi = std::min<int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (int64_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace igabem

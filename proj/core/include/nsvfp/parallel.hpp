#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace nsvfp {

/// Resolve a requested thread count; 0 means hardware concurrency.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) over contiguous blocks. Results written by index
/// keep reductions deterministic regardless of the thread count.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t t = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1));
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (std::size_t w = 0; w < t; ++w) {
    const std::size_t lo = n * w / t, hi = n * (w + 1) / t;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

} // namespace nsvfp

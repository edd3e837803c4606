#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace thermospec {

// Worker count: THERMOSPEC_WORKERS env var, else hardware concurrency.
inline int worker_count() {
  if (const char* env = std::getenv("THERMOSPEC_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Static block partition of [0, n); results must be written to disjoint
// slots so the merge is deterministic regardless of worker count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                         int workers = 0) {
  if (workers <= 0) workers = worker_count();
  if (workers <= 1 || n < 2) {
    fn(0, n);
    return;
  }
  const std::size_t w = std::min<std::size_t>(workers, n);
  std::vector<std::thread> threads;
  threads.reserve(w);
  const std::size_t chunk = (n + w - 1) / w;
  for (std::size_t i = 0; i < w; ++i) {
    const std::size_t lo = i * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& t : threads) t.join();
}

}  // namespace thermospec

#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace drokit {

// Thread budget: hardware concurrency, capped by the DRO_KIT_THREADS
// environment variable when set. Always at least 1.
inline int max_threads() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("DRO_KIT_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1 && cap < hw) hw = cap;
    if (cap >= 1 && hw < 1) hw = cap;
  }
  return hw;
}

// Runs fn(i) for i in [0, n). Each index writes only its own output slot, so
// results are identical whatever the thread count or interleaving.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  const int threads = std::min(max_threads(), n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([t, n, threads, &fn] {
      for (int i = t; i < n; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace drokit

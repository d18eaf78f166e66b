#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace paanet {

// Thread budget for embarrassingly parallel per-item work. Controlled by the
// PAANET_THREADS environment variable; defaults to 1 (fully serial).
inline int thread_budget() {
  const char* env = std::getenv("PAANET_THREADS");
  if (!env) return 1;
  try {
    const int v = std::stoi(env);
    return v < 1 ? 1 : v;
  } catch (...) {
    return 1;
  }
}

// Runs fn(i) for i in [0, n). Each index is processed exactly once and
// results must be written to disjoint slots, so the outcome is identical for
// any thread count.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
  const int threads = std::min<std::int64_t>(thread_budget(), n);
  if (threads <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([=, &fn]() {
      for (std::int64_t i = t; i < n; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace paanet

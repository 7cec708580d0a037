#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace kaucus {

// Runs fn(0..n-1) over up to `concurrency` workers. Callers own exception
// handling inside fn; results keyed by index stay deterministic whatever the
// schedule.
template <class Fn>
void parallel_for(std::size_t n, int concurrency, Fn&& fn) {
  if (n == 0) return;
  const int workers = std::clamp<int>(concurrency, 1, static_cast<int>(std::min<std::size_t>(n, 256)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
    });
  for (std::thread& t : pool) t.join();
}

}  // namespace kaucus

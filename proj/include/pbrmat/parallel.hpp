#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <utility>
#include <vector>

namespace pbrmat {

// Runs fn(i) for every i in [0, n). Work is handed out in fixed-size chunks
// through an atomic cursor. Callers must keep fn(i) a pure function of i that
// writes only i's own output slot; under that contract the result is
// bit-identical for every thread count.
template <typename F>
inline void parallel_for(std::int64_t n, int threads, F&& fn) {
  if (n <= 0) return;
  int nt = threads < 1 ? 1 : threads;
  if (nt == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  constexpr std::int64_t kChunk = 256;
  std::atomic<std::int64_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      std::int64_t begin = cursor.fetch_add(kChunk, std::memory_order_relaxed);
      if (begin >= n) return;
      std::int64_t end = begin + kChunk < n ? begin + kChunk : n;
      for (std::int64_t i = begin; i < end; ++i) fn(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace pbrmat

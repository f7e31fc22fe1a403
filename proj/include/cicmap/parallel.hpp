#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace cicmap {

// 0 selects the hardware concurrency.
inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Calls fn(begin, end) over contiguous chunks of [0, n). Callers write only
// to slots they own, so the result does not depend on the thread count.
template <typename Fn>
void parallel_for(std::int64_t n, unsigned threads, Fn&& fn) {
  if (n <= 0) return;
  const auto workers = static_cast<std::int64_t>(
      std::min<std::int64_t>(resolve_threads(threads), n));
  if (workers <= 1) {
    fn(std::int64_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (std::int64_t w = 0; w < workers; ++w) {
    const std::int64_t begin = w * chunk;
    const std::int64_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
}

}  // namespace cicmap

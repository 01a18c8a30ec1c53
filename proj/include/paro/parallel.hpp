#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace paro {

/// Runs fn(i) for i in [0, n). With workers <= 1 the loop is strictly serial.
/// Work is split into contiguous index ranges, one per worker, so any output
/// written to per-index slots is identical regardless of the worker count.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  const std::size_t chunk = (n + nw - 1) / nw;
  std::vector<std::exception_ptr> errors(nw);
  for (std::size_t w = 0; w < nw; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace paro

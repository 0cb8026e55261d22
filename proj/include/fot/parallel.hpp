#pragma once

#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "fot/types.hpp"

namespace fot {

inline unsigned effective_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Runs fn(i) for i in [0, n), split into contiguous chunks across threads.
// The first exception thrown by any worker is rethrown on the caller.
template <typename Fn>
void parallel_for(Index n, unsigned threads, Fn&& fn) {
  threads = effective_threads(threads);
  if (threads <= 1 || n < 2 * static_cast<Index>(threads)) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  const Index chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const Index begin = static_cast<Index>(t) * chunk;
    const Index end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (Index i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& worker : pool) worker.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace fot

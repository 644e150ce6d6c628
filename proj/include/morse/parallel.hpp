#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace morse {

// Runs fn(i) for i in [0, n). Work items must be independent; callers that
// reduce results do so afterwards in index order, which makes the outcome
// identical at any worker count.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t thread_count = std::min<std::size_t>(std::size_t(workers), n);
  std::vector<std::thread> threads;
  std::mutex error_mutex;
  std::exception_ptr error;
  std::size_t chunk = (n + thread_count - 1) / thread_count;
  for (std::size_t t = 0; t < thread_count; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (std::thread& th : threads) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace morse

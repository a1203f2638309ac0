#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dtwlmnn {

/// Process-wide worker cap (0 = hardware concurrency). Set by the CLI's
/// --threads flag.
void set_max_threads(unsigned threads);
unsigned max_threads();

namespace detail {
inline thread_local bool in_parallel_region = false;

struct RegionGuard {
  bool previous;
  RegionGuard() : previous(in_parallel_region) { in_parallel_region = true; }
  ~RegionGuard() { in_parallel_region = previous; }
};
}  // namespace detail

/// Runs body(i) for i in [0, count) on up to max_threads() workers with
/// dynamic scheduling. Nested calls from inside a worker run serially.
/// Callers write results into per-index slots so that any reduction
/// afterwards happens in a fixed order. The first exception
/// thrown by a worker is rethrown on the calling thread.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  const std::size_t workers =
      detail::in_parallel_region ? 1 : std::min<std::size_t>(max_threads(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    detail::RegionGuard guard;
    while (true) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count, std::memory_order_relaxed);
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace dtwlmnn

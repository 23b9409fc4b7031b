#pragma once

// Deterministic bounded-worker parallelism for independent work items. Items
// are claimed from a shared atomic counter and each item writes only to its
// own pre-allocated slot, so the complete result layout depends on the item
// index alone, never on scheduling or worker count. The first exception
// thrown by any item is captured and rethrown on the calling thread after
// all workers have joined.

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sohkit {

// requested = 0 means "use the hardware concurrency"; never more workers
// than items, never fewer than one.
inline unsigned resolved_worker_count(unsigned requested, std::size_t items) {
  unsigned w = requested != 0 ? requested : std::thread::hardware_concurrency();
  if (w == 0) w = 1;
  if (items < w) w = static_cast<unsigned>(items);
  return w == 0 ? 1u : w;
}

template <typename Fn>
void parallel_for_index(std::size_t count, unsigned workers, Fn&& fn) {
  if (count == 0) return;
  const unsigned w = resolved_worker_count(workers, count);
  if (w == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (unsigned t = 0; t < w; ++t) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace sohkit

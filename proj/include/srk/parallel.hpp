#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace srk {

// Runs fn(i) for i in [begin, end) on `threads` workers over contiguous index
// blocks. Workers write only to per-index slots owned by the caller, so the
// result is identical for any worker count; the first exception thrown by any
// worker is rethrown here.
inline void parallel_for(std::uint64_t begin, std::uint64_t end, int threads,
                         const std::function<void(std::uint64_t)>& fn) {
  if (end <= begin) return;
  const std::uint64_t count = end - begin;
  if (threads <= 1 || count == 1) {
    for (std::uint64_t i = begin; i < end; ++i) fn(i);
    return;
  }
  const std::uint64_t workers = std::min<std::uint64_t>(threads, count);
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (std::uint64_t w = 0; w < workers; ++w) {
    const std::uint64_t lo = begin + count * w / workers;
    const std::uint64_t hi = begin + count * (w + 1) / workers;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::uint64_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace srk

#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "aspus/types.hpp"

namespace aspus {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Work items are
/// assigned by fixed stride, so the set each worker runs is a function of the
/// worker count alone; callers writing to preallocated slots get results that
/// are independent of scheduling. The first exception thrown by any worker is
/// rethrown after all join.
inline void parallel_for(Index count, int workers,
                         const std::function<void(Index)>& fn) {
  if (count <= 0) return;
  const int used = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  if (used == 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(used));
  for (int t = 0; t < used; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (Index i = t; i < count; i += used) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace aspus

#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

namespace goalgauge {

// Applies fn to 0..n-1 on up to max_parallel worker threads. Output order is
// by index, so results are independent of scheduling. The first exception is
// rethrown after all workers finish.
template <typename Fn,
          typename Result = std::invoke_result_t<Fn&, std::size_t>>
std::vector<Result> parallel_map(std::size_t n, Fn&& fn, int max_parallel) {
  std::vector<Result> results(n);
  if (n == 0) return results;
  std::size_t workers =
      static_cast<std::size_t>(max_parallel < 1 ? 1 : max_parallel);
  if (workers > n) workers = n;
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) results[i] = fn(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          results[i] = fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

}  // namespace goalgauge

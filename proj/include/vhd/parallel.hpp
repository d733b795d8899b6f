#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vhd {

// Worker count from VHD_THREADS; defaults to 1 so runs stay single-core
// unless asked otherwise.
inline int configured_threads() {
  const char* env = std::getenv("VHD_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  if (n < 1) return 1;
  return n > 256 ? 256 : n;
}

// Index-parallel map; fn(i) must write results into caller-owned slots so
// the output order never depends on scheduling.
template <class Fn>
void parallel_for(int n, Fn&& fn) {
  const int workers = std::min(configured_threads(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace vhd

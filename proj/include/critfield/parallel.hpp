#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace critfield {

// Worker cap: explicit setting wins, then CRITFIELD_THREADS, then hardware.
inline int& thread_cap_storage() {
  static int cap = 0;
  return cap;
}

inline void set_thread_cap(int n) { thread_cap_storage() = n; }

inline int thread_cap() {
  if (thread_cap_storage() > 0) return thread_cap_storage();
  if (const char* env = std::getenv("CRITFIELD_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? (int)hw : 1;
}

// Runs body(i) for i in [0,n). Work is claimed in chunks off a shared
// counter; each index is executed exactly once, so writes indexed by i are
// deterministic regardless of scheduling.
template <class Body>
void parallel_for(int64_t n, const Body& body, int64_t chunk = 0) {
  if (n <= 0) return;
  const int workers = std::min<int64_t>(thread_cap(), n);
  if (workers <= 1) {
    for (int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  if (chunk <= 0) chunk = std::max<int64_t>(1, n / (8 * workers));
  std::atomic<int64_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<bool> failed{false};
  std::exception_ptr first_error = nullptr;
  std::mutex err_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const int64_t lo = next.fetch_add(chunk);
        if (lo >= n || failed.load(std::memory_order_relaxed)) return;
        const int64_t hi = std::min(n, lo + chunk);
        try {
          for (int64_t i = lo; i < hi; ++i) body(i);
        } catch (...) {
          std::lock_guard<std::mutex> g(err_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace critfield

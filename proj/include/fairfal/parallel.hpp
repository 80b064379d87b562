#pragma once

// Deterministic parallel-for: work items are pure functions of their index
// and write only to their own slot, so any thread count yields identical
// results. FAIRFAL_THREADS caps the pool size.

#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace fairfal {

inline int thread_cap(int requested) {
  int cap = requested > 0 ? requested : 1;
  if (const char* env = std::getenv("FAIRFAL_THREADS")) {
    try {
      const int e = std::stoi(env);
      if (e >= 1) cap = std::min(cap, e);
    } catch (...) {
      // ignore malformed values
    }
  }
  return cap;
}

template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  threads = std::min(thread_cap(threads), n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::exception_ptr error;
  std::mutex error_mu;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (int i = t; i < n; i += threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace fairfal

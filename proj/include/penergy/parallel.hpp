#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace penergy {

/// Thread count from PENERGY_THREADS, or 1 when unset or invalid.
int default_threads();

/// Calls f(k) for k in [0, n) on up to `threads` workers. Work is split into contiguous blocks and
/// every call writes only its own slot, so results do not depend on the thread count.
/// The first exception (lowest index) is rethrown after all workers finish.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t k = 0; k < n; ++k) f(k);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      const std::size_t lo = n * t / workers, hi = n * (t + 1) / workers;
      for (std::size_t k = lo; k < hi; ++k) {
        try {
          f(k);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace penergy

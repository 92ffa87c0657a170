#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace tandem {

/// Runs fn(i) for i in [0, n) over `threads` workers with contiguous chunks.
template <class Fn>
void parallel_for(long n, int threads, Fn&& fn) {
  if (n <= 0) return;
  const long workers = std::clamp<long>(threads, 1, n);
  if (workers == 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const long chunk = (n + workers - 1) / workers;
  for (long w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const long stop = std::min(n, (w + 1) * chunk);
        for (long i = w * chunk; i < stop; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace tandem

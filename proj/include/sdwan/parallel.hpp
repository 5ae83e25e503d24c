#pragma once

#include <exception>
#include <thread>
#include <utility>
#include <vector>

namespace sdwan {

// Split [0, n) into `workers` contiguous chunks and run fn(worker, begin, end)
// on each, worker 0 on the calling thread. The partition depends only on
// (workers, n); callers that merge per-worker results in worker order get
// worker-count independent output as long as per-item work is independent.
template <class Fn>
void parallel_for(int workers, int n, Fn&& fn) {
  if (n <= 0) return;
  if (workers > n) workers = n;
  if (workers <= 1) {
    fn(0, 0, n);
    return;
  }
  const int chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) {
    const int begin = w * chunk;
    const int end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(w, begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  try {
    fn(0, 0, std::min(n, chunk));
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace sdwan

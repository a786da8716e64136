#ifndef SANDPILE_PARALLEL_HPP
#define SANDPILE_PARALLEL_HPP

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sandpile {

/// Worker count from SANDPILE_THREADS (default 1). Never affects results.
inline int worker_count() {
  if (const char* env = std::getenv("SANDPILE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

/// Runs body(i) for i in [0, count). Each index must write only its own output
/// slot, so the result is independent of the number of workers.
template <typename Body>
void parallel_for(long count, Body&& body) {
  const int workers = static_cast<int>(std::min<long>(worker_count(), count));
  if (workers <= 1) {
    for (long i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (long i = w; i < count; i += workers) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace sandpile

#endif  // SANDPILE_PARALLEL_HPP

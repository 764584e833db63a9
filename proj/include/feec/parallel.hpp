#ifndef FEEC_PARALLEL_HPP
#define FEEC_PARALLEL_HPP

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace feec {

/// Number of worker threads, capped by the FEEC_THREADS environment variable.
inline unsigned thread_budget() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FEEC_THREADS")) {
    long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(cap));
  }
  return hw;
}

/// Static block partition of [0, count) over the thread budget. Each index is
/// processed exactly once and writes only to its own slot, so results do not
/// depend on scheduling. The first worker exception is rethrown in the caller.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  unsigned nt = thread_budget();
  if (nt <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  nt = std::min<unsigned>(nt, static_cast<unsigned>(count));
  std::vector<std::thread> pool;
  pool.reserve(nt);
  std::exception_ptr error;
  std::mutex error_mtx;
  for (unsigned t = 0; t < nt; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (std::size_t i = t; i < count; i += nt) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mtx);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

} // namespace feec

#endif

#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <utility>
#include <vector>

namespace tomoboost {

// Process-wide default worker count, overridable from the CLI.
int default_thread_count();
void set_default_thread_count(int threads);

// Resolve a user-facing thread argument: <= 0 means "use the default".
inline int resolve_threads(int threads) {
  return threads > 0 ? threads : default_thread_count();
}

// Run body(begin, end, worker) over disjoint contiguous blocks of [0, n).
// Callers must only write to locations owned by their items; under that
// contract results are identical for every worker count.
void parallel_blocks(std::int64_t n, int threads,
                     const std::function<void(std::int64_t, std::int64_t, int)>& body);

template <class F>
void parallel_for(std::int64_t n, int threads, F&& f) {
  parallel_blocks(n, threads, [&](std::int64_t begin, std::int64_t end, int) {
    for (std::int64_t i = begin; i < end; ++i) f(i);
  });
}

}  // namespace tomoboost

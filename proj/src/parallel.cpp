#include "tomoboost/parallel.hpp"

#include <algorithm>
#include <atomic>

namespace tomoboost {

namespace {
std::atomic<int> g_threads{0};
}

int default_thread_count() {
  int t = g_threads.load(std::memory_order_relaxed);
  if (t > 0) return t;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void set_default_thread_count(int threads) {
  g_threads.store(threads > 0 ? threads : 0, std::memory_order_relaxed);
}

void parallel_blocks(std::int64_t n, int threads,
                     const std::function<void(std::int64_t, std::int64_t, int)>& body) {
  if (n <= 0) return;
  int workers = int(std::max<std::int64_t>(1, std::min<std::int64_t>(resolve_threads(threads), n)));
  if (workers == 1) {
    body(0, n, 0);
    return;
  }

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  std::exception_ptr error;
  std::atomic<bool> failed{false};

  auto run = [&](int w) {
    std::int64_t begin = n * w / workers;
    std::int64_t end = n * (w + 1) / workers;
    try {
      body(begin, end, w);
    } catch (...) {
      if (!failed.exchange(true)) error = std::current_exception();
    }
  };

  for (int w = 1; w < workers; ++w) pool.emplace_back(run, w);
  run(0);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace tomoboost

#include "rcmcl/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace rcmcl {

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int n) { g_threads.store(std::max(1, n)); }

int num_threads() noexcept { return g_threads.load(); }

void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t threads = static_cast<std::size_t>(num_threads());
  const std::size_t chunks = std::min(threads, min_chunk == 0 ? n : n / std::max<std::size_t>(min_chunk, 1));
  if (chunks <= 1) {
    if (n > 0) fn(0, n);
    return;
  }
  const std::size_t step = (n + chunks - 1) / chunks;
  std::vector<std::jthread> workers;
  workers.reserve(chunks - 1);
  for (std::size_t c = 1; c < chunks; ++c) {
    const std::size_t b = c * step, e = std::min(n, b + step);
    if (b < e) workers.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(0, std::min(n, step));
}

void configure_allocator() noexcept {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace rcmcl

#include "ptdt/common/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ptdt {

namespace {
std::atomic<int> g_threads{1};
}

void configure_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

void set_max_threads(int n) {
  const int hw = std::max(1u, std::thread::hardware_concurrency());
  g_threads = std::clamp(n, 1, hw);
}

int max_threads() { return g_threads; }

}  // namespace ptdt

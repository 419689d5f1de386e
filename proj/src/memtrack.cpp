#include "aspus/memtrack.hpp"

#include <atomic>
#include <cerrno>
#include <cstdlib>

// The gauge interposes the C allocation entry points rather than operator
// new/delete: Eigen (and therefore every dense matrix in the library) obtains
// its buffers straight from malloc, and operator new funnels through malloc
// anyway, so this single layer sees everything. glibc keeps the real
// implementations reachable under __libc_* names, which makes interposition a
// matter of link order, with no dlsym bootstrap problem.

#if defined(__GLIBC__) || defined(__linux__)
#define ASPUS_MEMTRACK_INTERPOSE 1
#include <malloc.h>
#else
#define ASPUS_MEMTRACK_INTERPOSE 0
#endif

namespace {

std::atomic<std::size_t> g_current{0};
std::atomic<std::size_t> g_high{0};

#if ASPUS_MEMTRACK_INTERPOSE

inline std::size_t usable(void* p) noexcept {
  return p ? malloc_usable_size(p) : 0;
}

inline void account_alloc(void* p) noexcept {
  const std::size_t sz = usable(p);
  const std::size_t now =
      g_current.fetch_add(sz, std::memory_order_relaxed) + sz;
  std::size_t high = g_high.load(std::memory_order_relaxed);
  while (now > high &&
         !g_high.compare_exchange_weak(high, now, std::memory_order_relaxed)) {
  }
}

inline void account_free(void* p) noexcept {
  if (!p) return;
  g_current.fetch_sub(usable(p), std::memory_order_relaxed);
}

#endif

}  // namespace

namespace aspus::memtrack {

std::size_t current() noexcept {
  return g_current.load(std::memory_order_relaxed);
}

std::size_t high_water() noexcept {
  return g_high.load(std::memory_order_relaxed);
}

std::size_t reset_high_water() noexcept {
  const std::size_t now = g_current.load(std::memory_order_relaxed);
  g_high.store(now, std::memory_order_relaxed);
  return now;
}

}  // namespace aspus::memtrack

#if ASPUS_MEMTRACK_INTERPOSE

extern "C" {

void* __libc_malloc(std::size_t size);
void* __libc_calloc(std::size_t count, std::size_t size);
void* __libc_realloc(void* p, std::size_t size);
void* __libc_memalign(std::size_t align, std::size_t size);
void __libc_free(void* p);

void* malloc(std::size_t size) {
  void* p = __libc_malloc(size);
  account_alloc(p);
  return p;
}

void* calloc(std::size_t count, std::size_t size) {
  void* p = __libc_calloc(count, size);
  account_alloc(p);
  return p;
}

void* realloc(void* p, std::size_t size) {
  account_free(p);
  void* q = __libc_realloc(p, size);
  if (q) {
    account_alloc(q);
  } else if (size != 0) {
    account_alloc(p);  // failed grow keeps the old block alive
  }
  return q;
}

void* memalign(std::size_t align, std::size_t size) {
  void* p = __libc_memalign(align, size);
  account_alloc(p);
  return p;
}

void* aligned_alloc(std::size_t align, std::size_t size) {
  void* p = __libc_memalign(align, size);
  account_alloc(p);
  return p;
}

int posix_memalign(void** out, std::size_t align, std::size_t size) {
  if (align < sizeof(void*) || (align & (align - 1)) != 0) return EINVAL;
  void* p = __libc_memalign(align, size);
  if (!p) return ENOMEM;
  account_alloc(p);
  *out = p;
  return 0;
}

void free(void* p) {
  account_free(p);
  __libc_free(p);
}

}  // extern "C"

#endif

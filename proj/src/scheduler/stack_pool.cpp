#include "stack_pool.hpp"

#include <sys/mman.h>
#include <unistd.h>

#include <mutex>
#include <new>
#include <vector>

namespace amt::detail {
namespace {

constexpr std::size_t max_cached = 4096;

std::size_t page_size() {
  static const std::size_t size = static_cast<std::size_t>(::sysconf(_SC_PAGESIZE));
  return size;
}

struct free_list {
  std::mutex mutex;
  std::vector<void*> bases;

  ~free_list() {
    for (void* base : bases) ::munmap(base, pooled_stack::stack_size + page_size());
  }
};

free_list& pool() {
  static free_list instance;
  return instance;
}

} // namespace

boost::context::stack_context pooled_stack::allocate() {
  const std::size_t guard = page_size();
  void* base = nullptr;
  {
    auto& p = pool();
    std::lock_guard lock(p.mutex);
    if (!p.bases.empty()) {
      base = p.bases.back();
      p.bases.pop_back();
    }
  }
  if (!base) {
    base = ::mmap(nullptr, stack_size + guard, PROT_READ | PROT_WRITE,
                  MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
    if (base == MAP_FAILED) throw std::bad_alloc();
    // Stacks grow down; the lowest page traps overflow.
    ::mprotect(base, guard, PROT_NONE);
  }
  boost::context::stack_context sctx;
  sctx.size = stack_size;
  sctx.sp = static_cast<char*>(base) + guard + stack_size;
  return sctx;
}

void pooled_stack::deallocate(boost::context::stack_context& sctx) noexcept {
  const std::size_t guard = page_size();
  void* base = static_cast<char*>(sctx.sp) - stack_size - guard;
  auto& p = pool();
  {
    std::lock_guard lock(p.mutex);
    if (p.bases.size() < max_cached) {
      p.bases.push_back(base);
      return;
    }
  }
  ::munmap(base, stack_size + guard);
}

} // namespace amt::detail

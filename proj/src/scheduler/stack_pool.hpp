#pragma once

#include <boost/context/stack_context.hpp>

#include <cstddef>

namespace amt::detail {

/// Fixed-size task stacks with a guard page, recycled through a process-wide
/// free list so short tasks do not pay for mmap/munmap.
class pooled_stack {
 public:
  static constexpr std::size_t stack_size = 256 * 1024;

  boost::context::stack_context allocate();
  void deallocate(boost::context::stack_context& sctx) noexcept;
};

} // namespace amt::detail

#pragma once

#include "amt/error.hpp"
#include "amt/scheduler/scheduler.hpp"
#include "amt/tasking/async.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace amt {

struct parallel_for_options {
  std::size_t chunks_per_worker = 4;
};

/// Chunk length used for [lo, hi) on `workers` workers.
std::int64_t parallel_for_chunk(std::int64_t lo, std::int64_t hi, std::size_t workers,
                                std::size_t chunks_per_worker = 4);

/// Invokes `body(i)` once for every i in [lo, hi), one task per chunk.
template <typename F>
future<void> parallel_for(std::int64_t lo, std::int64_t hi, F body,
                          parallel_for_options opts = {}) {
  if (lo > hi) return make_exceptional_future<void>(errc::invalid_argument, "parallel_for: lo > hi");
  if (lo == hi) return make_ready_future();
  auto core = detail::current_scheduler();
  if (!core) return make_exceptional_future<void>(errc::runtime_shutdown, "parallel_for: no scheduler");
  scheduler sched(core);

  auto chunk = parallel_for_chunk(lo, hi, sched.worker_count(), opts.chunks_per_worker);
  std::vector<future<void>> parts;
  parts.reserve(static_cast<std::size_t>((hi - lo + chunk - 1) / chunk));
  for (std::int64_t begin = lo; begin < hi; begin += chunk) {
    std::int64_t end = std::min(hi, begin + chunk);
    parts.push_back(sched.spawn([body, begin, end] {
      for (std::int64_t i = begin; i < end; ++i) body(i);
    }));
  }
  return when_all(std::move(parts));
}

} // namespace amt

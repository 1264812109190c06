#include "amt/tasking/parallel_for.hpp"

namespace amt {

std::int64_t parallel_for_chunk(std::int64_t lo, std::int64_t hi, std::size_t workers,
                                std::size_t chunks_per_worker) {
  auto n = hi - lo;
  if (n <= 0) return 1;
  auto pieces = static_cast<std::int64_t>(std::max<std::size_t>(1, workers * chunks_per_worker));
  return std::max<std::int64_t>(1, (n + pieces - 1) / pieces);
}

} // namespace amt

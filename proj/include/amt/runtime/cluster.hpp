#pragma once

#include "amt/runtime/runtime.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace amt {

/// N localities in one process, connected over loopback TCP on ephemeral
/// ports. Meant for tests and demos; behaves like N separate processes
/// except that they share the action table and the log sink.
class local_cluster {
 public:
  explicit local_cluster(std::uint32_t localities,
                         scheduler_config sched = {policy_kind::local_priority, 2, 2},
                         log_level log = log_level::warn);
  ~local_cluster();

  local_cluster(const local_cluster&) = delete;
  local_cluster& operator=(const local_cluster&) = delete;

  runtime& operator[](std::size_t i) { return *nodes_.at(i); }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Shuts every locality down; idempotent.
  void shutdown();

 private:
  std::vector<std::unique_ptr<runtime>> nodes_;
};

} // namespace amt

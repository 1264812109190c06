#pragma once

#include "amt/scheduler/config.hpp"

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>

namespace amt::detail {

class scheduler_core;
struct execution_context;

struct execution_context_deleter {
  void operator()(execution_context* ctx) const noexcept;
};

/// Unit of work owned by exactly one worker (or queue) at a time.
///
/// Lifecycle edges: pending->active, active->suspended, suspended->pending,
/// active->terminated. Anything else is a scheduler bug.
class task {
 public:
  static constexpr std::size_t no_worker = std::numeric_limits<std::size_t>::max();

  task(std::uint64_t id, task_priority prio, std::function<void()> work)
      : work_(std::move(work)), id_(id), priority_(prio) {}

  task(const task&) = delete;
  task& operator=(const task&) = delete;

  std::uint64_t id() const noexcept { return id_; }
  task_priority priority() const noexcept { return priority_; }
  task_state state() const noexcept { return state_.load(std::memory_order_acquire); }

  /// Moves along one of the four legal edges; returns false otherwise.
  bool transition(task_state from, task_state to) noexcept;

  std::function<void()> work_;
  std::unique_ptr<execution_context, execution_context_deleter> ctx_;
  std::function<void(task*)> on_suspend_;
  scheduler_core* owner_ = nullptr;
  std::size_t last_worker_ = no_worker;
  bool counted_ = true;

 private:
  std::uint64_t id_;
  task_priority priority_;
  std::atomic<task_state> state_{task_state::pending};
};

} // namespace amt::detail

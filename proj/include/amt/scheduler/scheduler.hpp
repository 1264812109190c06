#pragma once

#include "amt/scheduler/config.hpp"
#include "amt/tasking/future.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <type_traits>
#include <vector>

namespace amt {

struct worker_stats {
  std::uint64_t tasks_executed = 0;
  std::uint64_t steal_attempts = 0;
  std::uint64_t steals_succeeded = 0;
  std::uint64_t leaf_fetches = 0;
  std::size_t queue_length = 0;
};

struct steal_stats {
  std::vector<worker_stats> workers;
  std::uint64_t tasks_enqueued = 0;  ///< fresh submissions, resumes excluded
  std::uint64_t tasks_discarded = 0;
  std::uint64_t root_enqueues = 0;   ///< fresh tasks whose first queue was a tree root
  std::uint64_t suspensions = 0;

  std::uint64_t total_executed() const;
  std::uint64_t total_steal_attempts() const;
  std::uint64_t total_steals() const;
};

/// Called with (task id, queue id) for every fresh task as it is enqueued.
using enqueue_observer = std::function<void(std::uint64_t, std::size_t)>;

namespace detail {

class scheduler_core;

} // namespace detail

/// Handle to a worker pool running one of the three queue policies.
///
/// Copies share the same pool. Workers start on construction.
class scheduler {
 public:
  explicit scheduler(scheduler_config cfg);
  explicit scheduler(std::shared_ptr<detail::scheduler_core> core) : core_(std::move(core)) {}

  std::size_t worker_count() const noexcept;
  policy_kind policy() const;

  /// Enqueues `work` and returns a future for its result. A hint pins the
  /// task to a worker queue (ignored by the hierarchical policy).
  template <typename F>
  auto spawn(F&& work, task_priority prio = task_priority::normal,
             std::optional<std::size_t> hint = std::nullopt) const {
    using R = std::invoke_result_t<std::decay_t<F>>;
    auto st = std::make_shared<detail::shared_state<R>>();
    bool ok = submit(
        [st, f = std::forward<F>(work)]() mutable { detail::invoke_into(*st, f); }, prio,
        hint);
    if (!ok) {
      st->try_set_error(std::make_exception_ptr(
          error(errc::runtime_shutdown, "spawn rejected: scheduler is shutting down")));
    }
    return future<R>(std::move(st));
  }

  /// Fire-and-forget enqueue; false if rejected.
  bool submit(std::function<void()> work, task_priority prio = task_priority::normal,
              std::optional<std::size_t> hint = std::nullopt,
              task_kind kind = task_kind::application) const;

  /// Drains all queues, installs `policy`, and redistributes the drained
  /// tasks round-robin. Returns the number of tasks moved.
  std::size_t set_policy(policy_kind policy) const;

  steal_stats stats() const;

  /// drain=true runs everything queued first; drain=false discards pending
  /// tasks. Returns the discard count. Idempotent.
  std::size_t shutdown(bool drain = true) const;

  bool running() const noexcept;

  void set_enqueue_observer(enqueue_observer obs) const;

  /// Makes this the fallback scheduler for threads outside any worker.
  void make_default() const;

  const std::shared_ptr<detail::scheduler_core>& core() const noexcept { return core_; }

 private:
  std::shared_ptr<detail::scheduler_core> core_;
};

/// Scheduler of the calling worker, else the thread's binding, else the
/// process default. Throws runtime_shutdown if none is available.
scheduler this_scheduler();

/// Worker index of the calling thread, or nullopt off-worker.
std::optional<std::size_t> this_worker_index() noexcept;

/// Id of the task running on this thread, or 0.
std::uint64_t this_task_id() noexcept;

/// Binds a scheduler to the current thread for the lifetime of the guard.
class scoped_scheduler {
 public:
  explicit scoped_scheduler(const scheduler& s);
  ~scoped_scheduler();
  scoped_scheduler(const scoped_scheduler&) = delete;
  scoped_scheduler& operator=(const scoped_scheduler&) = delete;

 private:
  std::shared_ptr<detail::scheduler_core> previous_;
};

} // namespace amt

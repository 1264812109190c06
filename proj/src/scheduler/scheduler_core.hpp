#pragma once

#include "amt/scheduler/policies.hpp"
#include "amt/scheduler/scheduler.hpp"
#include "amt/scheduler/task.hpp"

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <thread>
#include <vector>

namespace amt::detail {

class scheduler_core : public std::enable_shared_from_this<scheduler_core> {
 public:
  explicit scheduler_core(scheduler_config cfg);
  ~scheduler_core();

  void start();

  std::size_t worker_count() const noexcept { return cfg_.workers; }
  policy_kind policy() const;

  bool submit(std::function<void()> work, task_priority prio, std::optional<std::size_t> hint,
              task_kind kind = task_kind::application);
  void resume(task* t);

  std::size_t set_policy(policy_kind kind);
  steal_stats stats() const;
  std::size_t shutdown(bool drain);
  bool running() const noexcept { return !stopped_.load(std::memory_order_acquire); }
  void set_observer(enqueue_observer obs);

  /// Suspends the calling task until `state` completes.
  void suspend_until(task* t, shared_state_base& state);

 private:
  struct park_slot {
    std::mutex mutex;
    std::condition_variable cv;
    std::atomic<bool> sleeping{false};
    bool notified = false;
  };

  void worker_main(std::size_t index);
  void execute(task* t, std::size_t index);
  void enqueue(task* t, std::size_t worker, bool fresh);
  void wake(std::size_t worker);
  void park(std::size_t worker, std::chrono::microseconds timeout);
  void discard(task* t) noexcept;
  std::size_t pick_worker(std::optional<std::size_t> hint);
  void wait_for_switch() const;

  scheduler_config cfg_;
  std::unique_ptr<queue_policy> policy_;
  mutable std::shared_mutex policy_mutex_;
  std::atomic<bool> switching_{false};
  std::atomic<policy_kind> kind_;
  enqueue_observer observer_;

  std::vector<std::unique_ptr<worker_counters>> counters_;
  std::vector<std::unique_ptr<park_slot>> park_;
  std::vector<std::thread> threads_;

  std::atomic<std::uint64_t> next_task_id_{1};
  std::atomic<std::size_t> round_robin_{0};
  std::atomic<std::uint64_t> enqueued_{0};
  std::atomic<std::uint64_t> discarded_{0};
  std::atomic<std::uint64_t> root_enqueues_{0};
  std::atomic<std::uint64_t> suspensions_{0};
  std::atomic<std::int64_t> active_{0};
  std::atomic<std::int64_t> suspended_{0};

  std::atomic<bool> draining_{false};
  std::atomic<bool> stopped_{false};
  std::mutex shutdown_mutex_;
  bool shut_down_ = false;
  std::size_t shutdown_discards_ = 0;
};

} // namespace amt::detail

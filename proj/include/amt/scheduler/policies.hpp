#pragma once

#include "amt/scheduler/config.hpp"
#include "amt/scheduler/task.hpp"

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <vector>

namespace amt {

/// Mutex-guarded deque. The owner works one end, thieves the other.
class locked_deque {
 public:
  void push_back(detail::task* t);
  detail::task* pop_back();
  detail::task* pop_front();
  /// Removes up to `n` tasks from the front, oldest first.
  std::vector<detail::task*> take_front(std::size_t n);
  void append(const std::vector<detail::task*>& ts);
  std::vector<detail::task*> drain();
  std::size_t size() const;
  bool empty() const { return size() == 0; }

 private:
  mutable std::mutex mutex_;
  std::deque<detail::task*> items_;
  std::atomic<std::size_t> size_{0};
};

struct worker_counters {
  std::atomic<std::uint64_t> tasks_executed{0};
  std::atomic<std::uint64_t> steal_attempts{0};
  std::atomic<std::uint64_t> steals_succeeded{0};
  std::atomic<std::uint64_t> leaf_fetches{0};
};

/// Queue layout and dequeue discipline of one scheduling policy.
class queue_policy {
 public:
  virtual ~queue_policy() = default;

  virtual policy_kind kind() const noexcept = 0;
  virtual std::size_t workers() const noexcept = 0;

  /// Places `t` for `worker`; returns the id of the queue it landed in
  /// (worker index for flat policies, tree node index for hierarchical).
  virtual std::size_t push(detail::task* t, std::size_t worker) = 0;

  /// Owner-only dequeue for `worker`.
  virtual detail::task* pop(std::size_t worker, worker_counters& counters) = 0;

  virtual std::vector<detail::task*> drain() = 0;
  virtual std::size_t queue_length(std::size_t worker) const = 0;
  virtual std::size_t total_queued() const = 0;
};

/// One normal and one high-priority queue per worker. With `allow_steal`
/// off this is the static policy: a worker only ever sees its own queues.
class flat_policy : public queue_policy {
 public:
  flat_policy(std::size_t workers, bool allow_steal);

  policy_kind kind() const noexcept override {
    return allow_steal_ ? policy_kind::local_priority : policy_kind::static_queues;
  }
  std::size_t workers() const noexcept override { return queues_.size(); }
  std::size_t push(detail::task* t, std::size_t worker) override;
  detail::task* pop(std::size_t worker, worker_counters& counters) override;
  std::vector<detail::task*> drain() override;
  std::size_t queue_length(std::size_t worker) const override;
  std::size_t total_queued() const override;

  std::size_t normal_length(std::size_t worker) const { return queues_[worker]->normal.size(); }
  std::size_t high_length(std::size_t worker) const { return queues_[worker]->high.size(); }

 private:
  struct worker_queues {
    locked_deque normal;
    locked_deque high;
  };

  std::vector<std::unique_ptr<worker_queues>> queues_;
  bool allow_steal_;
};

/// Tree of queues. New work enters at the root and trickles toward the
/// leaves on demand; each leaf belongs to one worker. Leaves never steal
/// sideways.
class hierarchical_policy : public queue_policy {
 public:
  static constexpr std::size_t no_parent = static_cast<std::size_t>(-1);

  hierarchical_policy(std::size_t workers, std::size_t arity);

  policy_kind kind() const noexcept override { return policy_kind::hierarchical; }
  std::size_t workers() const noexcept override { return leaf_of_.size(); }
  std::size_t push(detail::task* t, std::size_t worker) override;
  detail::task* pop(std::size_t worker, worker_counters& counters) override;
  std::vector<detail::task*> drain() override;
  std::size_t queue_length(std::size_t worker) const override;
  std::size_t total_queued() const override;

  std::size_t arity() const noexcept { return arity_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t root() const noexcept { return 0; }
  std::size_t leaf_of(std::size_t worker) const { return leaf_of_[worker]; }
  std::size_t parent_of(std::size_t node) const { return nodes_[node]->parent; }
  const std::vector<std::size_t>& children_of(std::size_t node) const {
    return nodes_[node]->children;
  }
  std::size_t node_length(std::size_t node) const { return nodes_[node]->queue.size(); }

  /// Moves min(len, max(1, len / arity)) tasks, oldest first, from `node`
  /// into its child `child`. Returns the number moved.
  std::size_t trickle_down(std::size_t node, std::size_t child);

  /// Test hook: put a task directly into an arbitrary node.
  void push_to_node(detail::task* t, std::size_t node) { nodes_[node]->queue.push_back(t); }

 private:
  struct node {
    locked_deque queue;
    std::size_t parent = no_parent;
    std::vector<std::size_t> children;
  };

  /// Refills `node` from its ancestors; returns false if nothing arrived.
  bool refill(std::size_t node);

  std::vector<std::unique_ptr<node>> nodes_;
  std::vector<std::size_t> leaf_of_;
  std::size_t arity_;
};

std::unique_ptr<queue_policy> make_policy(policy_kind kind, std::size_t workers,
                                          std::size_t arity);

} // namespace amt

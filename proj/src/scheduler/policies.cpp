#include "amt/scheduler/policies.hpp"

#include "amt/error.hpp"

#include <algorithm>

namespace amt {

void locked_deque::push_back(detail::task* t) {
  std::lock_guard lock(mutex_);
  items_.push_back(t);
  size_.store(items_.size(), std::memory_order_relaxed);
}

detail::task* locked_deque::pop_back() {
  if (size_.load(std::memory_order_relaxed) == 0) return nullptr;
  std::lock_guard lock(mutex_);
  if (items_.empty()) return nullptr;
  auto* t = items_.back();
  items_.pop_back();
  size_.store(items_.size(), std::memory_order_relaxed);
  return t;
}

detail::task* locked_deque::pop_front() {
  if (size_.load(std::memory_order_relaxed) == 0) return nullptr;
  std::lock_guard lock(mutex_);
  if (items_.empty()) return nullptr;
  auto* t = items_.front();
  items_.pop_front();
  size_.store(items_.size(), std::memory_order_relaxed);
  return t;
}

std::vector<detail::task*> locked_deque::take_front(std::size_t n) {
  std::vector<detail::task*> out;
  std::lock_guard lock(mutex_);
  n = std::min(n, items_.size());
  out.assign(items_.begin(), items_.begin() + static_cast<std::ptrdiff_t>(n));
  items_.erase(items_.begin(), items_.begin() + static_cast<std::ptrdiff_t>(n));
  size_.store(items_.size(), std::memory_order_relaxed);
  return out;
}

void locked_deque::append(const std::vector<detail::task*>& ts) {
  std::lock_guard lock(mutex_);
  items_.insert(items_.end(), ts.begin(), ts.end());
  size_.store(items_.size(), std::memory_order_relaxed);
}

std::vector<detail::task*> locked_deque::drain() {
  std::lock_guard lock(mutex_);
  std::vector<detail::task*> out(items_.begin(), items_.end());
  items_.clear();
  size_.store(0, std::memory_order_relaxed);
  return out;
}

std::size_t locked_deque::size() const { return size_.load(std::memory_order_relaxed); }

// flat_policy

flat_policy::flat_policy(std::size_t workers, bool allow_steal) : allow_steal_(allow_steal) {
  if (workers == 0) throw_error(errc::invalid_argument, "policy needs at least one worker");
  queues_.reserve(workers);
  for (std::size_t i = 0; i < workers; ++i) queues_.push_back(std::make_unique<worker_queues>());
}

std::size_t flat_policy::push(detail::task* t, std::size_t worker) {
  auto& q = *queues_[worker];
  if (t->priority() == task_priority::high) {
    q.high.push_back(t);
  } else {
    q.normal.push_back(t);
  }
  return worker;
}

detail::task* flat_policy::pop(std::size_t worker, worker_counters& counters) {
  auto& own = *queues_[worker];
  if (auto* t = own.high.pop_front()) return t;
  if (auto* t = own.normal.pop_back()) return t;
  if (!allow_steal_) return nullptr;

  const std::size_t n = queues_.size();
  for (std::size_t k = 1; k < n; ++k) {
    auto& victim = *queues_[(worker + k) % n];
    counters.steal_attempts.fetch_add(1, std::memory_order_relaxed);
    auto* t = victim.high.pop_front();
    if (!t) t = victim.normal.pop_front();
    if (t) {
      counters.steals_succeeded.fetch_add(1, std::memory_order_relaxed);
      return t;
    }
  }
  return nullptr;
}

std::vector<detail::task*> flat_policy::drain() {
  std::vector<detail::task*> out;
  for (auto& q : queues_) {
    auto hi = q->high.drain();
    auto lo = q->normal.drain();
    out.insert(out.end(), hi.begin(), hi.end());
    out.insert(out.end(), lo.begin(), lo.end());
  }
  return out;
}

std::size_t flat_policy::queue_length(std::size_t worker) const {
  return queues_[worker]->normal.size() + queues_[worker]->high.size();
}

std::size_t flat_policy::total_queued() const {
  std::size_t total = 0;
  for (std::size_t w = 0; w < queues_.size(); ++w) total += queue_length(w);
  return total;
}

// hierarchical_policy

hierarchical_policy::hierarchical_policy(std::size_t workers, std::size_t arity)
    : arity_(arity) {
  if (workers == 0) throw_error(errc::invalid_argument, "policy needs at least one worker");
  if (arity < 2) throw_error(errc::invalid_argument, "tree arity must be at least 2");

  // Level sizes from the leaves up, then laid out root-first.
  std::vector<std::size_t> sizes{workers};
  while (sizes.back() > 1) sizes.push_back((sizes.back() + arity - 1) / arity);
  std::reverse(sizes.begin(), sizes.end());

  std::vector<std::size_t> offset(sizes.size());
  std::size_t total = 0;
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    offset[l] = total;
    total += sizes[l];
  }
  nodes_.reserve(total);
  for (std::size_t i = 0; i < total; ++i) nodes_.push_back(std::make_unique<node>());

  for (std::size_t l = 1; l < sizes.size(); ++l) {
    for (std::size_t j = 0; j < sizes[l]; ++j) {
      std::size_t self = offset[l] + j;
      std::size_t parent = offset[l - 1] + j / arity;
      nodes_[self]->parent = parent;
      nodes_[parent]->children.push_back(self);
    }
  }
  leaf_of_.resize(workers);
  for (std::size_t w = 0; w < workers; ++w) leaf_of_[w] = offset.back() + w;
}

std::size_t hierarchical_policy::push(detail::task* t, std::size_t) {
  nodes_[root()]->queue.push_back(t);
  return root();
}

std::size_t hierarchical_policy::trickle_down(std::size_t from, std::size_t child) {
  auto& src = nodes_[from]->queue;
  std::size_t len = src.size();
  if (len == 0) return 0;
  std::size_t want = std::min(len, std::max<std::size_t>(1, len / arity_));
  auto batch = src.take_front(want);
  nodes_[child]->queue.append(batch);
  return batch.size();
}

bool hierarchical_policy::refill(std::size_t n) {
  std::size_t parent = nodes_[n]->parent;
  if (parent == no_parent) return false;
  if (nodes_[parent]->queue.empty() && !refill(parent)) return false;
  return trickle_down(parent, n) > 0;
}

detail::task* hierarchical_policy::pop(std::size_t worker, worker_counters& counters) {
  auto leaf = leaf_of_[worker];
  auto& q = nodes_[leaf]->queue;
  if (auto* t = q.pop_front()) return t;
  if (!refill(leaf)) return nullptr;
  counters.leaf_fetches.fetch_add(1, std::memory_order_relaxed);
  return q.pop_front();
}

std::vector<detail::task*> hierarchical_policy::drain() {
  std::vector<detail::task*> out;
  for (auto& n : nodes_) {
    auto ts = n->queue.drain();
    out.insert(out.end(), ts.begin(), ts.end());
  }
  return out;
}

std::size_t hierarchical_policy::queue_length(std::size_t worker) const {
  return nodes_[leaf_of_[worker]]->queue.size();
}

std::size_t hierarchical_policy::total_queued() const {
  std::size_t total = 0;
  for (auto& n : nodes_) total += n->queue.size();
  return total;
}

std::unique_ptr<queue_policy> make_policy(policy_kind kind, std::size_t workers,
                                          std::size_t arity) {
  switch (kind) {
    case policy_kind::static_queues: return std::make_unique<flat_policy>(workers, false);
    case policy_kind::local_priority: return std::make_unique<flat_policy>(workers, true);
    case policy_kind::hierarchical: return std::make_unique<hierarchical_policy>(workers, arity);
  }
  throw_error(errc::invalid_argument, "unknown policy");
}

} // namespace amt

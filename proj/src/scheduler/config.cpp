#include "amt/scheduler/config.hpp"

#include "amt/error.hpp"
#include "amt/scheduler/task.hpp"

namespace amt {

std::string_view to_string(policy_kind p) noexcept {
  switch (p) {
    case policy_kind::static_queues: return "static";
    case policy_kind::local_priority: return "local_priority";
    case policy_kind::hierarchical: return "hierarchical";
  }
  return "unknown";
}

std::optional<policy_kind> parse_policy(std::string_view s) noexcept {
  if (s == "static") return policy_kind::static_queues;
  if (s == "local_priority" || s == "local-priority" || s == "thread_local")
    return policy_kind::local_priority;
  if (s == "hierarchical") return policy_kind::hierarchical;
  return std::nullopt;
}

void scheduler_config::validate() const {
  if (workers == 0) throw_error(errc::invalid_argument, "scheduler needs at least one worker");
  if (tree_arity < 2) throw_error(errc::invalid_argument, "tree arity must be at least 2");
}

namespace detail {

bool task::transition(task_state from, task_state to) noexcept {
  bool legal = (from == task_state::pending && to == task_state::active) ||
               (from == task_state::active && to == task_state::suspended) ||
               (from == task_state::suspended && to == task_state::pending) ||
               (from == task_state::active && to == task_state::terminated);
  if (!legal) return false;
  return state_.compare_exchange_strong(from, to, std::memory_order_acq_rel);
}

} // namespace detail
} // namespace amt

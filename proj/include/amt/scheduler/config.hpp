#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace amt {

enum class task_priority { normal, high };

/// Instrumentation tasks (counter sampling) run like any other task but are
/// left out of the enqueued/executed/discarded tallies, so observing a
/// counter never changes it.
enum class task_kind { application, instrumentation };

enum class policy_kind { static_queues, local_priority, hierarchical };

std::string_view to_string(policy_kind p) noexcept;
std::optional<policy_kind> parse_policy(std::string_view s) noexcept;

struct scheduler_config {
  policy_kind policy = policy_kind::local_priority;
  std::size_t workers = 1;
  std::size_t tree_arity = 2;

  /// Throws amt::error(invalid_argument) on workers == 0 or arity < 2.
  void validate() const;
};

enum class task_state { pending, active, suspended, terminated };

} // namespace amt

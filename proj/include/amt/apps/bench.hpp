#pragma once

#include "amt/scheduler/config.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace amt {

class runtime;

/// One CSV cell. Doubles always carry a '.', an exponent or a non-finite
/// spelling, so a parsed report has the same cell types as the original.
using report_cell = std::variant<std::int64_t, double, std::string>;

/// Tabular benchmark result: a header row plus data rows.
struct benchmark_report {
  std::vector<std::string> columns;
  std::vector<std::vector<report_cell>> rows;

  void add_row(std::vector<report_cell> row);
  /// Cell of `row` under `column`; throws not_found.
  const report_cell& at(std::size_t row, std::string_view column) const;

  /// Header then rows, comma separated, LF line endings. Strings holding
  /// commas, quotes or newlines are quoted with doubled quotes.
  std::string to_csv() const;
  static benchmark_report parse_csv(std::string_view text);

  bool operator==(const benchmark_report&) const = default;
};

std::string format_cell(const report_cell& c);

/// Serial reference: F(0) = 0, F(1) = 1.
std::int64_t fib_serial(std::int64_t n);
/// Closed form round(phi^n / sqrt 5); exact in double for n <= 70.
std::int64_t fib_closed_form(std::int64_t n);

/// Futurized Fibonacci on `rt`: each level above `cutoff` spawns its
/// branches and joins them with dataflow. Throws action_failed if the
/// result disagrees with the closed form.
benchmark_report bench_fib(runtime& rt, std::int64_t n, std::int64_t cutoff);

enum class policy_skew { balanced, all_to_0 };
/// How a synthetic task spends its time: spinning on the CPU, or sleeping
/// (models an occupied worker when there are fewer cores than workers).
enum class task_workload { spin, sleep, automatic };

struct policy_bench_params {
  std::size_t tasks = 10000;
  std::int64_t task_us = 100;
  policy_skew skew = policy_skew::all_to_0;
  std::size_t workers = 4;
  task_workload workload = task_workload::automatic;
  std::vector<policy_kind> policies{policy_kind::static_queues, policy_kind::local_priority,
                                    policy_kind::hierarchical};
};

/// Resolves `automatic` for this machine.
task_workload effective_workload(task_workload w, std::size_t workers);

/// Runs the same workload on a fresh scheduler per policy; one row per
/// policy with makespan and steal counters.
benchmark_report bench_policy_compare(const policy_bench_params& params);

std::string_view to_string(policy_skew s) noexcept;
std::string_view to_string(task_workload w) noexcept;
policy_skew parse_skew(std::string_view s);
task_workload parse_workload(std::string_view s);

} // namespace amt

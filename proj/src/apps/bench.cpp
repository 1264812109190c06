#include "amt/apps/bench.hpp"

#include "amt/error.hpp"
#include "amt/runtime/runtime.hpp"
#include "amt/scheduler/scheduler.hpp"
#include "amt/tasking/async.hpp"

#include <fmt/format.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <latch>
#include <thread>

namespace amt {

// Reports.

void benchmark_report::add_row(std::vector<report_cell> row) {
  if (row.size() != columns.size()) {
    throw_error(errc::invalid_argument, fmt::format("report row has {} cells, expected {}",
                                                    row.size(), columns.size()));
  }
  rows.push_back(std::move(row));
}

const report_cell& benchmark_report::at(std::size_t row, std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == column) return rows.at(row).at(i);
  }
  throw_error(errc::not_found, "report has no column '" + std::string(column) + "'");
}

namespace {

bool needs_quotes(std::string_view s) {
  return s.find_first_of(",\"\n\r") != std::string_view::npos;
}

std::string quoted(std::string_view s) {
  if (!needs_quotes(s)) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

report_cell parse_cell(const std::string& s, bool was_quoted) {
  if (was_quoted || s.empty()) return s;
  std::int64_t i = 0;
  auto [pi, ei] = std::from_chars(s.data(), s.data() + s.size(), i);
  if (ei == std::errc{} && pi == s.data() + s.size()) return i;
  double d = 0;
  auto [pd, ed] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ed == std::errc{} && pd == s.data() + s.size()) return d;
  return s;
}

} // namespace

std::string format_cell(const report_cell& c) {
  if (auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (auto* d = std::get_if<double>(&c)) {
    auto s = fmt::format("{}", *d);  // shortest representation that round-trips
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  }
  const auto& str = std::get<std::string>(c);
  // A bare string that would read back as a number must be quoted.
  if (parse_cell(str, false).index() != 2) return "\"" + str + "\"";
  return ::amt::quoted(str);
}

std::string benchmark_report::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ',';
    out += ::amt::quoted(columns[i]);
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_cell(row[i]);
    }
    out += '\n';
  }
  return out;
}

benchmark_report benchmark_report::parse_csv(std::string_view text) {
  std::vector<std::vector<std::pair<std::string, bool>>> lines;
  std::vector<std::pair<std::string, bool>> line;
  std::string cell;
  bool in_quotes = false, was_quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      in_quotes = true;
      was_quoted = true;
    } else if (c == ',') {
      line.emplace_back(std::move(cell), was_quoted);
      cell.clear();
      was_quoted = false;
    } else if (c == '\n') {
      line.emplace_back(std::move(cell), was_quoted);
      lines.push_back(std::move(line));
      line.clear();
      cell.clear();
      was_quoted = false;
      any = false;
    } else if (c != '\r') {
      cell += c;
    }
  }
  if (in_quotes) throw_error(errc::decode_error, "CSV ends inside a quoted cell");
  if (any) {
    line.emplace_back(std::move(cell), was_quoted);
    lines.push_back(std::move(line));
  }
  if (lines.empty()) throw_error(errc::decode_error, "CSV has no header row");

  benchmark_report r;
  for (auto& [name, _] : lines[0]) r.columns.push_back(name);
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (lines[l].size() != r.columns.size()) {
      throw_error(errc::decode_error, fmt::format("CSV line {} has {} cells, expected {}", l + 1,
                                                  lines[l].size(), r.columns.size()));
    }
    std::vector<report_cell> row;
    for (auto& [s, q] : lines[l]) row.push_back(parse_cell(s, q));
    r.rows.push_back(std::move(row));
  }
  return r;
}

// Fibonacci.

std::int64_t fib_serial(std::int64_t n) {
  std::int64_t a = 0, b = 1;
  for (std::int64_t i = 0; i < n; ++i) {
    auto t = a + b;
    a = b;
    b = t;
  }
  return a;
}

std::int64_t fib_closed_form(std::int64_t n) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  return std::llround(std::pow(phi, static_cast<double>(n)) / std::sqrt(5.0));
}

namespace {

future<std::int64_t> fib_future(std::int64_t n, std::int64_t cutoff) {
  if (n < 2 || n <= cutoff) return make_ready_future(fib_serial(n));
  auto left = spawn([n, cutoff] { return fib_future(n - 1, cutoff).get(); });
  auto right = spawn([n, cutoff] { return fib_future(n - 2, cutoff).get(); });
  return dataflow([](std::int64_t a, std::int64_t b) { return a + b; }, std::move(left),
                  std::move(right));
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

} // namespace

benchmark_report bench_fib(runtime& rt, std::int64_t n, std::int64_t cutoff) {
  if (n < 0) throw_error(errc::invalid_argument, "fib needs n >= 0");
  if (n > 92) throw_error(errc::invalid_argument, "fib(n) overflows int64 above n = 92");
  const auto before = rt.sched().stats().total_executed();
  const auto t0 = std::chrono::steady_clock::now();
  auto result = rt.spawn([n, cutoff] { return fib_future(n, cutoff).get(); }).get();
  const double ms = elapsed_ms(t0);
  const auto tasks = rt.sched().stats().total_executed() - before;

  const auto expected = n <= 70 ? fib_closed_form(n) : fib_serial(n);
  if (result != expected) {
    throw_error(errc::action_failed,
                fmt::format("fib({}) computed {} but the closed form gives {}", n, result, expected));
  }
  benchmark_report r;
  r.columns = {"benchmark", "n", "cutoff", "value", "expected", "tasks", "wall_time_ms"};
  r.add_row({std::string("fib"), n, cutoff, result, expected, static_cast<std::int64_t>(tasks), ms});
  return r;
}

// Policy comparison.

std::string_view to_string(policy_skew s) noexcept {
  return s == policy_skew::balanced ? "balanced" : "all-to-0";
}

std::string_view to_string(task_workload w) noexcept {
  switch (w) {
    case task_workload::spin: return "spin";
    case task_workload::sleep: return "sleep";
    case task_workload::automatic: return "auto";
  }
  return "?";
}

policy_skew parse_skew(std::string_view s) {
  if (s == "balanced") return policy_skew::balanced;
  if (s == "all-to-0" || s == "all_to_0") return policy_skew::all_to_0;
  throw_error(errc::invalid_argument,
              "unknown skew '" + std::string(s) + "' (expected balanced or all-to-0)");
}

task_workload parse_workload(std::string_view s) {
  if (s == "spin") return task_workload::spin;
  if (s == "sleep") return task_workload::sleep;
  if (s == "auto") return task_workload::automatic;
  throw_error(errc::invalid_argument,
              "unknown workload '" + std::string(s) + "' (expected spin, sleep or auto)");
}

task_workload effective_workload(task_workload w, std::size_t workers) {
  if (w != task_workload::automatic) return w;
  // Spinning workers only overlap when each has a core of its own.
  return std::thread::hardware_concurrency() >= workers ? task_workload::spin
                                                        : task_workload::sleep;
}

namespace {

void burn(std::chrono::microseconds d, task_workload w) {
  if (w == task_workload::sleep) {
    std::this_thread::sleep_for(d);
    return;
  }
  auto until = std::chrono::steady_clock::now() + d;
  while (std::chrono::steady_clock::now() < until) {
  }
}

} // namespace

benchmark_report bench_policy_compare(const policy_bench_params& p) {
  const auto workload = effective_workload(p.workload, p.workers);
  benchmark_report r;
  r.columns = {"benchmark", "policy",      "skew",           "workload",
               "workers",   "tasks",       "task_us",        "makespan_ms",
               "executed",  "steals_attempted", "steals_succeeded"};
  for (auto policy : p.policies) {
    scheduler sched(scheduler_config{policy, p.workers, 2});
    std::latch done(static_cast<std::ptrdiff_t>(p.tasks));
    const std::chrono::microseconds d(p.task_us);
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < p.tasks; ++i) {
      std::optional<std::size_t> hint;
      if (p.skew == policy_skew::all_to_0) {
        hint = 0;
      } else {
        hint = i % p.workers;
      }
      if (!sched.submit([&done, d, workload] {
            burn(d, workload);
            done.count_down();
          }, task_priority::normal, hint)) {
        throw_error(errc::runtime_shutdown, "benchmark scheduler refused a task");
      }
    }
    done.wait();
    const double ms = elapsed_ms(t0);
    sched.shutdown(true);
    auto st = sched.stats();
    r.add_row({std::string("policy"), std::string(to_string(policy)),
               std::string(to_string(p.skew)), std::string(to_string(workload)),
               static_cast<std::int64_t>(p.workers), static_cast<std::int64_t>(p.tasks),
               p.task_us, ms, static_cast<std::int64_t>(st.total_executed()),
               static_cast<std::int64_t>(st.total_steal_attempts()),
               static_cast<std::int64_t>(st.total_steals())});
  }
  return r;
}

} // namespace amt

#pragma once

#include "amt/scheduler/scheduler.hpp"
#include "amt/tasking/future.hpp"

#include <cstddef>
#include <optional>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

namespace amt {

/// Runs `work` as a new task on the current scheduler.
template <typename F>
auto spawn(F&& work, task_priority prio = task_priority::normal) {
  using R = std::invoke_result_t<std::decay_t<F>>;
  auto core = detail::current_scheduler();
  if (!core) {
    return make_exceptional_future<R>(errc::runtime_shutdown, "spawn: no running scheduler");
  }
  return scheduler(std::move(core)).spawn(std::forward<F>(work), prio);
}

/// Completes once every input completes. Values keep input order; if any
/// input failed, the result carries the first failure in input order.
template <typename T>
auto when_all(std::vector<future<T>> fs) {
  using out_t = std::conditional_t<std::is_void_v<T>, void, std::vector<T>>;
  auto out = std::make_shared<detail::shared_state<out_t>>();
  if (fs.empty()) {
    if constexpr (std::is_void_v<T>) {
      out->try_set_value(std::monostate{});
    } else {
      out->try_set_value(std::vector<T>{});
    }
    return future<out_t>(std::move(out));
  }

  struct gather {
    std::vector<future<T>> inputs;
    std::atomic<std::size_t> remaining;
  };
  auto g = std::make_shared<gather>();
  g->remaining.store(fs.size());
  g->inputs = std::move(fs);

  for (auto& f : g->inputs) {
    f.state()->on_ready([g, out] {
      if (g->remaining.fetch_sub(1, std::memory_order_acq_rel) != 1) return;
      for (auto& in : g->inputs) {
        if (in.has_exception()) {
          out->try_set_error(in.exception());
          return;
        }
      }
      if constexpr (std::is_void_v<T>) {
        out->try_set_value(std::monostate{});
      } else {
        std::vector<T> values;
        values.reserve(g->inputs.size());
        for (auto& in : g->inputs) values.push_back(in.state()->value());
        out->try_set_value(std::move(values));
      }
    });
  }
  return future<out_t>(std::move(out));
}

/// Heterogeneous form: yields a tuple of the input values.
template <typename... Ts>
  requires(sizeof...(Ts) > 0 && (!std::is_void_v<Ts> && ...))
future<std::tuple<Ts...>> when_all(future<Ts>... fs) {
  auto out = std::make_shared<detail::shared_state<std::tuple<Ts...>>>();
  auto inputs = std::make_shared<std::tuple<future<Ts>...>>(std::move(fs)...);
  auto remaining = std::make_shared<std::atomic<std::size_t>>(sizeof...(Ts));

  auto finish = [inputs, out] {
    std::exception_ptr first;
    std::apply(
        [&](auto&... in) {
          ((first = first ? first : (in.has_exception() ? in.exception() : nullptr)), ...);
        },
        *inputs);
    if (first) {
      out->try_set_error(first);
      return;
    }
    out->try_set_value(std::apply(
        [](auto&... in) { return std::tuple<Ts...>(in.state()->value()...); }, *inputs));
  };

  std::apply(
      [&](auto&... in) {
        (in.state()->on_ready([remaining, finish] {
          if (remaining->fetch_sub(1, std::memory_order_acq_rel) == 1) finish();
        }),
         ...);
      },
      *inputs);
  return future<std::tuple<Ts...>>(std::move(out));
}

/// Runs `body` once every dependency holds a value, as
/// then(when_all(deps), body). A failed dependency skips `body`.
template <typename F, typename... Ts>
auto dataflow(F&& body, future<Ts>... deps) {
  if constexpr (sizeof...(Ts) == 0) {
    return spawn(std::forward<F>(body));
  } else {
    return when_all(std::move(deps)...).then(
        [f = std::forward<F>(body)](const std::tuple<Ts...>& args) mutable {
          return std::apply(f, args);
        });
  }
}

/// Dataflow over a homogeneous dependency list; `body` receives the values.
template <typename F, typename T>
auto dataflow(F&& body, std::vector<future<T>> deps) {
  if constexpr (std::is_void_v<T>) {
    return when_all(std::move(deps)).then(std::forward<F>(body));
  } else {
    return when_all(std::move(deps)).then(
        [f = std::forward<F>(body)](const std::vector<T>& values) mutable { return f(values); });
  }
}

} // namespace amt

#pragma once

#include "amt/error.hpp"
#include "amt/scheduler/config.hpp"

#include <atomic>
#include <condition_variable>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace amt {

template <typename T> class future;
template <typename T> class promise;

namespace detail {

class scheduler_core;

class shared_state_base {
 public:
  enum class status : int { empty, value, error };

  shared_state_base() = default;
  shared_state_base(const shared_state_base&) = delete;
  shared_state_base& operator=(const shared_state_base&) = delete;
  virtual ~shared_state_base() = default;

  bool is_ready() const noexcept {
    return status_.load(std::memory_order_acquire) != status::empty;
  }
  bool has_value() const noexcept {
    return status_.load(std::memory_order_acquire) == status::value;
  }
  bool has_error() const noexcept {
    return status_.load(std::memory_order_acquire) == status::error;
  }

  /// Runs `cb` once the state is complete. If it already is, `cb` runs
  /// inline on the calling thread. Callbacks never run under the state lock.
  void on_ready(std::function<void()> cb);

  /// Blocks until complete. Inside a task the task suspends and its worker
  /// keeps running other tasks; elsewhere the thread parks.
  void wait();

  bool try_set_exception(std::exception_ptr ep);

  const std::exception_ptr& exception() const noexcept { return error_; }

 protected:
  template <typename Store>
  bool try_complete(Store&& store) {
    std::unique_lock lock(mutex_);
    if (status_.load(std::memory_order_relaxed) != status::empty) return false;
    std::forward<Store>(store)();
    return finish(lock);
  }

  bool finish(std::unique_lock<std::mutex>& lock);

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::atomic<status> status_{status::empty};
  std::atomic<bool> external_waiters_{false};
  std::exception_ptr error_;
  std::vector<std::function<void()>> callbacks_;
};

template <typename T>
using stored_t = std::conditional_t<std::is_void_v<T>, std::monostate, T>;

template <typename T>
class shared_state final : public shared_state_base {
 public:
  bool try_set_value(stored_t<T> v) {
    return try_complete([&] {
      value_.emplace(std::move(v));
      status_.store(status::value, std::memory_order_release);
    });
  }

  bool try_set_error(std::exception_ptr ep) { return try_set_exception(std::move(ep)); }

  const stored_t<T>& value() const { return *value_; }
  stored_t<T>& value() { return *value_; }

 private:
  std::optional<stored_t<T>> value_;
};

// Scheduler hooks, defined with the scheduler.
bool in_task() noexcept;
void suspend_current_until(shared_state_base& state);
std::shared_ptr<scheduler_core> current_scheduler() noexcept;
task_priority current_priority() noexcept;
/// Enqueues `work` as a fresh task; returns false when the scheduler is
/// gone or no longer accepting work.
bool post_task(const std::shared_ptr<scheduler_core>& sched, task_priority prio,
               std::function<void()> work);

template <typename F, typename... Args>
auto invoke_into(shared_state<std::invoke_result_t<F, Args...>>& out, F& f,
                 Args&&... args) noexcept -> void {
  using R = std::invoke_result_t<F, Args...>;
  try {
    if constexpr (std::is_void_v<R>) {
      std::invoke(f, std::forward<Args>(args)...);
      out.try_set_value(std::monostate{});
    } else {
      out.try_set_value(std::invoke(f, std::forward<Args>(args)...));
    }
  } catch (...) {
    out.try_set_error(std::current_exception());
  }
}

template <typename T> struct is_future : std::false_type {};
template <typename T> struct is_future<future<T>> : std::true_type {};

} // namespace detail

/// Single-assignment result cell shared between producers and consumers.
///
/// `future` is a shared handle: copies observe the same state, so one
/// future may feed several dataflow nodes.
template <typename T>
class future {
 public:
  using value_type = T;

  future() = default;
  explicit future(std::shared_ptr<detail::shared_state<T>> st) : state_(std::move(st)) {}

  bool valid() const noexcept { return state_ != nullptr; }
  bool is_ready() const noexcept { return state_ && state_->is_ready(); }
  bool has_value() const noexcept { return state_ && state_->has_value(); }
  bool has_exception() const noexcept { return state_ && state_->has_error(); }

  void wait() const {
    check_valid();
    state_->wait();
  }

  /// Returns the value or rethrows the stored error.
  T get() const {
    wait();
    if (state_->has_error()) std::rethrow_exception(state_->exception());
    if constexpr (!std::is_void_v<T>) return state_->value();
  }

  /// Waits, then returns the stored error (null if the future holds a value).
  std::exception_ptr exception() const {
    wait();
    return state_->exception();
  }

  /// Schedules `cont` as a new task once this future holds a value. On
  /// error `cont` is skipped and the error flows into the returned future.
  template <typename F>
  auto then(F&& cont) const {
    check_valid();
    using result_t = typename lazy_result<F>::type;
    auto out = std::make_shared<detail::shared_state<result_t>>();
    auto sched = detail::current_scheduler();
    auto prio = detail::current_priority();
    auto src = state_;
    src->on_ready([src, out, sched, prio, f = std::forward<F>(cont)]() mutable {
      if (src->has_error()) {
        out->try_set_error(src->exception());
        return;
      }
      bool posted = detail::post_task(sched, prio, [src, out, f = std::move(f)]() mutable {
        if constexpr (std::is_void_v<T>) {
          detail::invoke_into(*out, f);
        } else {
          detail::invoke_into(*out, f, std::as_const(src->value()));
        }
      });
      if (!posted) {
        out->try_set_error(std::make_exception_ptr(
            error(errc::runtime_shutdown, "continuation rejected: runtime is shut down")));
      }
    });
    return future<result_t>(std::move(out));
  }

  const std::shared_ptr<detail::shared_state<T>>& state() const noexcept { return state_; }

 private:
  template <typename F>
  struct lazy_result;

 public:
  /// Result type of a continuation `F` attached to this future.
  template <typename F>
  using lazy_result_of = typename lazy_result<F>::type;

 private:
  template <typename F>
  struct lazy_result {
    static auto probe() {
      if constexpr (std::is_void_v<T>) {
        return std::type_identity<std::invoke_result_t<F>>{};
      } else {
        return std::type_identity<std::invoke_result_t<F, const T&>>{};
      }
    }
    using type = typename decltype(probe())::type;
  };

  void check_valid() const {
    if (!state_) throw_error(errc::invalid_argument, "operation on an invalid future");
  }

  std::shared_ptr<detail::shared_state<T>> state_;
};

template <typename T>
class promise {
 public:
  promise() : state_(std::make_shared<detail::shared_state<T>>()) {}

  future<T> get_future() const { return future<T>(state_); }

  template <typename U = T>
    requires(!std::is_void_v<U>)
  void set_value(U v) {
    if (!state_->try_set_value(std::move(v))) already_satisfied();
  }

  template <typename U = T>
    requires std::is_void_v<U>
  void set_value() {
    if (!state_->try_set_value(std::monostate{})) already_satisfied();
  }

  template <typename U = T>
    requires(!std::is_void_v<U>)
  bool try_set_value(U v) {
    return state_->try_set_value(std::move(v));
  }

  template <typename U = T>
    requires std::is_void_v<U>
  bool try_set_value() {
    return state_->try_set_value(std::monostate{});
  }

  void set_exception(std::exception_ptr ep) {
    if (!state_->try_set_error(std::move(ep))) already_satisfied();
  }

  bool try_set_exception(std::exception_ptr ep) { return state_->try_set_error(std::move(ep)); }

 private:
  [[noreturn]] static void already_satisfied() {
    throw_error(errc::promise_already_satisfied, "future already completed");
  }

  std::shared_ptr<detail::shared_state<T>> state_;
};

template <typename T>
future<std::decay_t<T>> make_ready_future(T&& v) {
  auto st = std::make_shared<detail::shared_state<std::decay_t<T>>>();
  st->try_set_value(std::forward<T>(v));
  return future<std::decay_t<T>>(std::move(st));
}

inline future<void> make_ready_future() {
  auto st = std::make_shared<detail::shared_state<void>>();
  st->try_set_value(std::monostate{});
  return future<void>(std::move(st));
}

template <typename T>
future<T> make_exceptional_future(std::exception_ptr ep) {
  auto st = std::make_shared<detail::shared_state<T>>();
  st->try_set_error(std::move(ep));
  return future<T>(std::move(st));
}

template <typename T>
future<T> make_exceptional_future(errc code, const std::string& what) {
  return make_exceptional_future<T>(std::make_exception_ptr(error(code, what)));
}

namespace detail {

/// Runs `f` now and wraps its outcome (value or exception) in a ready future.
template <typename F>
auto ready_from(F&& f) {
  using R = std::invoke_result_t<F>;
  auto st = std::make_shared<shared_state<R>>();
  invoke_into(*st, f);
  return future<R>(std::move(st));
}

/// Completes the result with `f(value)` on whichever thread completes
/// `src`, without posting a task. For cheap, non-blocking glue only; errors
/// pass through and `f` is skipped.
template <typename T, typename F>
auto map_inline(const future<T>& src, F f) {
  using R = typename future<T>::template lazy_result_of<F>;
  auto out = std::make_shared<shared_state<R>>();
  auto st = src.state();
  st->on_ready([st, out, f = std::move(f)]() mutable {
    if (st->has_error()) {
      out->try_set_error(st->exception());
    } else if constexpr (std::is_void_v<T>) {
      invoke_into(*out, f);
    } else {
      invoke_into(*out, f, std::as_const(st->value()));
    }
  });
  return future<R>(std::move(out));
}

/// Like map_inline, but `f` returns a future whose outcome is forwarded.
template <typename T, typename F>
auto chain_inline(const future<T>& src, F f) {
  using inner = typename future<T>::template lazy_result_of<F>;
  using R = typename inner::value_type;
  auto out = std::make_shared<shared_state<R>>();
  auto st = src.state();
  st->on_ready([st, out, f = std::move(f)]() mutable {
    if (st->has_error()) {
      out->try_set_error(st->exception());
      return;
    }
    inner next;
    try {
      if constexpr (std::is_void_v<T>) {
        next = f();
      } else {
        next = f(std::as_const(st->value()));
      }
    } catch (...) {
      out->try_set_error(std::current_exception());
      return;
    }
    auto nst = next.state();
    nst->on_ready([nst, out] {
      if (nst->has_error()) {
        out->try_set_error(nst->exception());
      } else {
        out->try_set_value(nst->value());
      }
    });
  });
  return future<R>(std::move(out));
}

} // namespace detail

} // namespace amt

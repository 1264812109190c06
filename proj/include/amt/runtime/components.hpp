#pragma once

#include "amt/agas/component.hpp"
#include "amt/runtime/runtime.hpp"
#include "amt/tasking/channel.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

namespace amt {

/// Migratable integer accumulator; actions "counter/add" and "counter/get".
class counter_object final : public component {
 public:
  static constexpr const char* type = "amt/counter_object";

  explicit counter_object(std::int64_t initial = 0) : value_(initial) {}

  std::string type_name() const override { return type; }
  value serialize() const override { return value(get()); }

  std::int64_t add(std::int64_t n) { return value_.fetch_add(n, std::memory_order_acq_rel) + n; }
  std::int64_t get() const { return value_.load(std::memory_order_acquire); }

 private:
  std::atomic<std::int64_t> value_;
};

/// Channel of values living in AGAS. Not migratable: receivers park inside
/// the object.
class channel_object final : public component {
 public:
  static constexpr const char* type = "amt/channel";

  std::string type_name() const override { return type; }

  const channel<value>& chan() const noexcept { return chan_; }

 private:
  channel<value> chan_;
};

namespace detail {
future<void> channel_send(runtime& rt, const gid& g, value v);
future<value> channel_recv(runtime& rt, const gid& g);
future<void> channel_close(runtime& rt, const gid& g);
} // namespace detail

/// Typed handle to a channel object, usable from any locality. Sends made
/// through one handle are delivered in the order they were issued.
template <typename T>
class remote_channel {
 public:
  remote_channel() = default;
  remote_channel(runtime& rt, gid id) : rt_(&rt), id_(id), order_(std::make_shared<ordering>()) {}

  /// Creates the channel on `rt`'s locality and publishes it under `name`.
  static future<remote_channel> create(runtime& rt, const std::string& name) {
    auto g = rt.agas().register_object(std::make_shared<channel_object>());
    runtime* r = &rt;
    return detail::map_inline(rt.agas().register_name(name, g),
                              [r, g] { return remote_channel(*r, g); });
  }

  /// Looks a published channel up by name.
  static future<remote_channel> connect(runtime& rt, const std::string& name) {
    runtime* r = &rt;
    return detail::map_inline(rt.agas().resolve_name(name),
                              [r](const gid& g) { return remote_channel(*r, g); });
  }

  future<void> send(T v) const {
    promise<void> done;
    auto fut = done.get_future();
    future<void> prev;
    {
      std::lock_guard lock(order_->mutex);
      prev = order_->last;
      order_->last = fut;
    }
    auto go = [rt = rt_, g = id_, v = to_value(std::move(v)), done]() mutable {
      auto sent = detail::channel_send(*rt, g, std::move(v));
      sent.state()->on_ready([sent, done]() mutable {
        if (sent.has_exception()) {
          done.set_exception(sent.exception());
        } else {
          done.set_value();
        }
      });
    };
    if (prev.valid()) {
      prev.state()->on_ready(std::move(go));
    } else {
      go();
    }
    return fut;
  }

  future<T> recv() const {
    return detail::map_inline(detail::channel_recv(*rt_, id_),
                              [](const value& v) { return from_value<T>(v); });
  }

  future<void> close() const { return detail::channel_close(*rt_, id_); }

  const gid& id() const noexcept { return id_; }

 private:
  struct ordering {
    std::mutex mutex;
    future<void> last;
  };

  runtime* rt_ = nullptr;
  gid id_;
  std::shared_ptr<ordering> order_;
};

} // namespace amt

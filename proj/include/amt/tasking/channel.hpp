#pragma once

#include "amt/error.hpp"
#include "amt/tasking/future.hpp"

#include <deque>
#include <memory>
#include <mutex>

namespace amt {

/// Unbounded FIFO channel. A receive before any send yields a pending
/// future that the next send resolves. Copies share one channel.
template <typename T>
class channel {
 public:
  channel() : impl_(std::make_shared<impl>()) {}

  /// Throws channel_closed once the channel is closed.
  void send(T v) const {
    std::unique_lock lock(impl_->mutex);
    if (impl_->closed) throw_error(errc::channel_closed, "send on a closed channel");
    if (!impl_->waiters.empty()) {
      auto waiter = std::move(impl_->waiters.front());
      impl_->waiters.pop_front();
      lock.unlock();
      waiter.set_value(std::move(v));
      return;
    }
    impl_->values.push_back(std::move(v));
  }

  future<T> recv() const {
    std::lock_guard lock(impl_->mutex);
    if (!impl_->values.empty()) {
      auto f = make_ready_future(std::move(impl_->values.front()));
      impl_->values.pop_front();
      return f;
    }
    if (impl_->closed) {
      return make_exceptional_future<T>(errc::channel_closed, "receive on a closed channel");
    }
    promise<T> p;
    auto f = p.get_future();
    impl_->waiters.push_back(std::move(p));
    return f;
  }

  /// Fails all pending receives. Buffered values stay receivable.
  void close() const {
    std::deque<promise<T>> waiters;
    {
      std::lock_guard lock(impl_->mutex);
      impl_->closed = true;
      waiters.swap(impl_->waiters);
    }
    for (auto& w : waiters) {
      w.set_exception(std::make_exception_ptr(error(errc::channel_closed, "channel closed")));
    }
  }

  bool closed() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->closed;
  }

  std::size_t buffered() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->values.size();
  }

  std::size_t pending_receivers() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->waiters.size();
  }

 private:
  struct impl {
    std::mutex mutex;
    std::deque<T> values;
    std::deque<promise<T>> waiters;
    bool closed = false;
  };

  std::shared_ptr<impl> impl_;
};

} // namespace amt

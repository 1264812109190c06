#include "amt/tasking/future.hpp"

namespace amt::detail {

void shared_state_base::on_ready(std::function<void()> cb) {
  {
    std::unique_lock lock(mutex_);
    if (status_.load(std::memory_order_relaxed) == status::empty) {
      callbacks_.push_back(std::move(cb));
      return;
    }
  }
  cb();
}

void shared_state_base::wait() {
  if (is_ready()) return;
  if (in_task()) {
    while (!is_ready()) suspend_current_until(*this);
    return;
  }
  std::unique_lock lock(mutex_);
  external_waiters_.store(true, std::memory_order_relaxed);
  cv_.wait(lock, [this] { return status_.load(std::memory_order_relaxed) != status::empty; });
}

bool shared_state_base::try_set_exception(std::exception_ptr ep) {
  return try_complete([&] {
    error_ = std::move(ep);
    status_.store(status::error, std::memory_order_release);
  });
}

bool shared_state_base::finish(std::unique_lock<std::mutex>& lock) {
  auto callbacks = std::move(callbacks_);
  callbacks_.clear();
  bool notify = external_waiters_.load(std::memory_order_relaxed);
  lock.unlock();
  if (notify) {
    // Waiters re-check status under the lock, so a late notify is harmless.
    std::lock_guard relock(mutex_);
    cv_.notify_all();
  }
  for (auto& cb : callbacks) cb();
  return true;
}

} // namespace amt::detail

#include "scheduler_core.hpp"

#include "stack_pool.hpp"

#include <boost/context/fiber.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <exception>

namespace amt {
namespace detail {

struct execution_context {
  boost::context::fiber self;
  boost::context::fiber caller;
};

void execution_context_deleter::operator()(execution_context* ctx) const noexcept { delete ctx; }

namespace {

struct worker_tls {
  scheduler_core* sched = nullptr;
  std::size_t index = 0;
  task* current = nullptr;
};

thread_local worker_tls tls_state;
thread_local std::shared_ptr<scheduler_core> tls_binding;

// A task may resume on a different OS thread, so the TLS address must be
// recomputed after every switch. The asm barrier keeps the compiler from
// treating this accessor as pure and caching its result.
[[gnu::noinline]] worker_tls& tls() {
  worker_tls* p = &tls_state;
  asm volatile("" : "+r"(p)::"memory");
  return *p;
}

std::mutex default_mutex;
std::weak_ptr<scheduler_core> default_scheduler;

constexpr int spin_attempts = 100;
constexpr auto min_park = std::chrono::microseconds(8);
constexpr auto max_park = std::chrono::microseconds(1000);
constexpr auto suspended_grace = std::chrono::seconds(2);

} // namespace

bool in_task() noexcept { return tls().current != nullptr; }

void suspend_current_until(shared_state_base& state) {
  auto& t = tls();
  t.sched->suspend_until(t.current, state);
}

std::shared_ptr<scheduler_core> current_scheduler() noexcept {
  if (auto* s = tls().sched) return s->shared_from_this();
  if (tls_binding) return tls_binding;
  std::lock_guard lock(default_mutex);
  return default_scheduler.lock();
}

task_priority current_priority() noexcept {
  if (auto* t = tls().current) return t->priority();
  return task_priority::normal;
}

bool post_task(const std::shared_ptr<scheduler_core>& sched, task_priority prio,
               std::function<void()> work) {
  if (!sched) return false;
  return sched->submit(std::move(work), prio, std::nullopt);
}

// scheduler_core

scheduler_core::scheduler_core(scheduler_config cfg) : cfg_(cfg), kind_(cfg.policy) {
  cfg_.validate();
  policy_ = make_policy(cfg_.policy, cfg_.workers, cfg_.tree_arity);
  for (std::size_t i = 0; i < cfg_.workers; ++i) {
    counters_.push_back(std::make_unique<worker_counters>());
    park_.push_back(std::make_unique<park_slot>());
  }
}

scheduler_core::~scheduler_core() {
  if (tls().sched == this) {
    spdlog::critical("scheduler destroyed from one of its own workers without shutdown");
    std::terminate();
  }
  shutdown(true);
}

void scheduler_core::start() {
  threads_.reserve(cfg_.workers);
  for (std::size_t i = 0; i < cfg_.workers; ++i) {
    threads_.emplace_back([this, i] { worker_main(i); });
  }
}

policy_kind scheduler_core::policy() const {
  std::shared_lock lock(policy_mutex_);
  return policy_->kind();
}

void scheduler_core::wait_for_switch() const {
  while (switching_.load(std::memory_order_acquire)) std::this_thread::yield();
}

std::size_t scheduler_core::pick_worker(std::optional<std::size_t> hint) {
  if (hint) return *hint;
  auto& t = tls();
  if (t.sched == this) return t.index;
  return round_robin_.fetch_add(1, std::memory_order_relaxed) % cfg_.workers;
}

bool scheduler_core::submit(std::function<void()> work, task_priority prio,
                            std::optional<std::size_t> hint, task_kind kind) {
  if (hint && *hint >= cfg_.workers) {
    throw_error(errc::invalid_argument, "worker hint out of range");
  }
  if (stopped_.load(std::memory_order_acquire)) return false;
  // Once a drain has begun only the pool's own tasks may add work.
  if (draining_.load(std::memory_order_acquire) && tls().sched != this) return false;

  auto* t = new task(next_task_id_.fetch_add(1, std::memory_order_relaxed), prio, std::move(work));
  t->owner_ = this;
  t->counted_ = kind == task_kind::application;
  auto worker = pick_worker(hint);
  t->last_worker_ = worker;
  wait_for_switch();
  std::size_t node = 0;
  {
    std::shared_lock lock(policy_mutex_);
    if (stopped_.load(std::memory_order_acquire)) {
      lock.unlock();
      delete t;
      return false;
    }
    node = policy_->push(t, worker);
    if (t->counted_) enqueued_.fetch_add(1, std::memory_order_relaxed);
    if (policy_->kind() == policy_kind::hierarchical && node == 0) {
      root_enqueues_.fetch_add(1, std::memory_order_relaxed);
    }
    if (observer_) observer_(t->id(), node);
  }
  wake(worker);
  return true;
}

void scheduler_core::resume(task* t) {
  suspended_.fetch_sub(1, std::memory_order_acq_rel);
  if (!t->transition(task_state::suspended, task_state::pending)) {
    spdlog::critical("resume of task {} in unexpected state", t->id());
    std::terminate();
  }
  enqueue(t, t->last_worker_, false);
}

void scheduler_core::enqueue(task* t, std::size_t worker, bool) {
  wait_for_switch();
  {
    std::shared_lock lock(policy_mutex_);
    if (!stopped_.load(std::memory_order_acquire)) {
      policy_->push(t, worker);
      lock.unlock();
      wake(worker);
      return;
    }
  }
  discard(t);
}

void scheduler_core::discard(task* t) noexcept {
  if (t->counted_) discarded_.fetch_add(1, std::memory_order_relaxed);
  delete t;
}

void scheduler_core::wake(std::size_t worker) {
  auto try_wake = [this](std::size_t w) {
    auto& p = *park_[w];
    if (!p.sleeping.load(std::memory_order_acquire)) return false;
    std::lock_guard lock(p.mutex);
    p.notified = true;
    p.cv.notify_one();
    return true;
  };
  if (try_wake(worker)) return;
  if (kind_.load(std::memory_order_relaxed) == policy_kind::static_queues) return;
  for (std::size_t k = 1; k < cfg_.workers; ++k) {
    if (try_wake((worker + k) % cfg_.workers)) return;
  }
}

void scheduler_core::park(std::size_t worker, std::chrono::microseconds timeout) {
  auto& p = *park_[worker];
  std::unique_lock lock(p.mutex);
  if (!p.notified) {
    p.sleeping.store(true, std::memory_order_release);
    p.cv.wait_for(lock, timeout,
                  [&] { return p.notified || stopped_.load(std::memory_order_acquire); });
    p.sleeping.store(false, std::memory_order_release);
  }
  p.notified = false;
}

void scheduler_core::worker_main(std::size_t index) {
  tls() = worker_tls{this, index, nullptr};
  int spins = 0;
  auto park_for = min_park;
  while (!stopped_.load(std::memory_order_acquire)) {
    task* t = nullptr;
    if (!switching_.load(std::memory_order_acquire)) {
      std::shared_lock lock(policy_mutex_);
      t = policy_->pop(index, *counters_[index]);
    }
    if (t) {
      execute(t, index);
      spins = 0;
      park_for = min_park;
      continue;
    }
    if (++spins <= spin_attempts) {
      std::this_thread::yield();
      continue;
    }
    park(index, park_for);
    park_for = std::min(park_for * 2, max_park);
  }
  tls() = worker_tls{};
}

void scheduler_core::execute(task* t, std::size_t index) {
  if (!t->transition(task_state::pending, task_state::active)) {
    spdlog::critical("task {} dequeued in unexpected state", t->id());
    std::terminate();
  }
  t->last_worker_ = index;
  active_.fetch_add(1, std::memory_order_acq_rel);
  tls().current = t;

  if (!t->ctx_) {
    t->ctx_.reset(new execution_context);
    t->ctx_->self = boost::context::fiber(
        std::allocator_arg, pooled_stack{}, [t](boost::context::fiber&& caller) {
          t->ctx_->caller = std::move(caller);
          try {
            t->work_();
          } catch (const boost::context::detail::forced_unwind&) {
            throw;
          } catch (const std::exception& e) {
            spdlog::error("task {} leaked exception: {}", t->id(), e.what());
          } catch (...) {
            spdlog::error("task {} leaked a non-standard exception", t->id());
          }
          t->work_ = nullptr;
          t->transition(task_state::active, task_state::terminated);
          return std::move(t->ctx_->caller);
        });
  }
  t->ctx_->self = std::move(t->ctx_->self).resume();
  tls().current = nullptr;

  if (t->state() == task_state::terminated) {
    if (t->counted_) counters_[index]->tasks_executed.fetch_add(1, std::memory_order_relaxed);
    delete t;
    active_.fetch_sub(1, std::memory_order_acq_rel);
    return;
  }

  // Suspended: the task's stack is no longer live, so it is now safe to
  // publish it to whoever will resume it.
  suspended_.fetch_add(1, std::memory_order_acq_rel);
  suspensions_.fetch_add(1, std::memory_order_relaxed);
  active_.fetch_sub(1, std::memory_order_acq_rel);
  auto on_suspend = std::move(t->on_suspend_);
  t->on_suspend_ = nullptr;
  on_suspend(t);
}

void scheduler_core::suspend_until(task* t, shared_state_base& state) {
  t->on_suspend_ = [this, &state](task* self) {
    state.on_ready([this, self] { resume(self); });
  };
  if (!t->transition(task_state::active, task_state::suspended)) {
    spdlog::critical("suspend of task {} in unexpected state", t->id());
    std::terminate();
  }
  t->ctx_->caller = std::move(t->ctx_->caller).resume();
}

std::size_t scheduler_core::set_policy(policy_kind kind) {
  static std::mutex switch_mutex;
  std::lock_guard serial(switch_mutex);
  if (policy() == kind) return 0;

  switching_.store(true, std::memory_order_release);
  std::size_t moved = 0;
  {
    std::unique_lock lock(policy_mutex_);
    auto staged = policy_->drain();
    policy_ = make_policy(kind, cfg_.workers, cfg_.tree_arity);
    kind_.store(kind, std::memory_order_relaxed);
    for (std::size_t i = 0; i < staged.size(); ++i) policy_->push(staged[i], i % cfg_.workers);
    moved = staged.size();
  }
  switching_.store(false, std::memory_order_release);
  for (std::size_t w = 0; w < cfg_.workers; ++w) wake(w);
  return moved;
}

steal_stats scheduler_core::stats() const {
  steal_stats s;
  s.workers.resize(cfg_.workers);
  std::shared_lock lock(policy_mutex_);
  for (std::size_t w = 0; w < cfg_.workers; ++w) {
    auto& c = *counters_[w];
    auto& out = s.workers[w];
    out.tasks_executed = c.tasks_executed.load(std::memory_order_relaxed);
    out.steal_attempts = c.steal_attempts.load(std::memory_order_relaxed);
    out.steals_succeeded = c.steals_succeeded.load(std::memory_order_relaxed);
    out.leaf_fetches = c.leaf_fetches.load(std::memory_order_relaxed);
    out.queue_length = policy_->queue_length(w);
  }
  s.tasks_enqueued = enqueued_.load(std::memory_order_relaxed);
  s.tasks_discarded = discarded_.load(std::memory_order_relaxed);
  s.root_enqueues = root_enqueues_.load(std::memory_order_relaxed);
  s.suspensions = suspensions_.load(std::memory_order_relaxed);
  return s;
}

void scheduler_core::set_observer(enqueue_observer obs) {
  std::unique_lock lock(policy_mutex_);
  observer_ = std::move(obs);
}

std::size_t scheduler_core::shutdown(bool drain) {
  if (tls().sched == this) {
    throw_error(errc::invalid_argument, "scheduler cannot be shut down from its own worker");
  }
  std::lock_guard guard(shutdown_mutex_);
  if (shut_down_) return shutdown_discards_;
  draining_.store(true, std::memory_order_release);

  if (drain && !threads_.empty()) {
    std::optional<std::chrono::steady_clock::time_point> idle_since;
    for (;;) {
      std::size_t queued = 0;
      {
        std::shared_lock lock(policy_mutex_);
        queued = policy_->total_queued();
      }
      auto active = active_.load(std::memory_order_acquire);
      auto suspended = suspended_.load(std::memory_order_acquire);
      if (queued == 0 && active == 0) {
        if (suspended == 0) break;
        // Tasks parked on futures nobody will complete are dropped after a grace period.
        auto now = std::chrono::steady_clock::now();
        if (!idle_since) idle_since = now;
        if (now - *idle_since > suspended_grace) break;
      } else {
        idle_since.reset();
      }
      std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
  }

  {
    std::unique_lock lock(policy_mutex_);
    stopped_.store(true, std::memory_order_release);
  }
  for (auto& p : park_) {
    std::lock_guard lock(p->mutex);
    p->cv.notify_all();
  }
  for (auto& th : threads_) {
    if (th.joinable()) th.join();
  }
  std::vector<task*> leftover;
  {
    std::unique_lock lock(policy_mutex_);
    leftover = policy_->drain();
  }
  shutdown_discards_ = 0;
  for (auto* t : leftover) {
    if (t->counted_) ++shutdown_discards_;
    discard(t);
  }
  shut_down_ = true;
  return shutdown_discards_;
}

} // namespace detail

// steal_stats

std::uint64_t steal_stats::total_executed() const {
  std::uint64_t n = 0;
  for (auto& w : workers) n += w.tasks_executed;
  return n;
}

std::uint64_t steal_stats::total_steal_attempts() const {
  std::uint64_t n = 0;
  for (auto& w : workers) n += w.steal_attempts;
  return n;
}

std::uint64_t steal_stats::total_steals() const {
  std::uint64_t n = 0;
  for (auto& w : workers) n += w.steals_succeeded;
  return n;
}

// scheduler

scheduler::scheduler(scheduler_config cfg)
    : core_(std::make_shared<detail::scheduler_core>(cfg)) {
  core_->start();
  std::lock_guard lock(detail::default_mutex);
  if (detail::default_scheduler.expired()) detail::default_scheduler = core_;
}

std::size_t scheduler::worker_count() const noexcept { return core_->worker_count(); }
policy_kind scheduler::policy() const { return core_->policy(); }

bool scheduler::submit(std::function<void()> work, task_priority prio,
                       std::optional<std::size_t> hint, task_kind kind) const {
  return core_->submit(std::move(work), prio, hint, kind);
}

std::size_t scheduler::set_policy(policy_kind policy) const { return core_->set_policy(policy); }
steal_stats scheduler::stats() const { return core_->stats(); }
std::size_t scheduler::shutdown(bool drain) const { return core_->shutdown(drain); }
bool scheduler::running() const noexcept { return core_->running(); }
void scheduler::set_enqueue_observer(enqueue_observer obs) const {
  core_->set_observer(std::move(obs));
}

void scheduler::make_default() const {
  std::lock_guard lock(detail::default_mutex);
  detail::default_scheduler = core_;
}

scheduler this_scheduler() {
  auto core = detail::current_scheduler();
  if (!core) throw_error(errc::runtime_shutdown, "no scheduler available on this thread");
  return scheduler(std::move(core));
}

std::optional<std::size_t> this_worker_index() noexcept {
  auto& t = detail::tls();
  if (!t.sched) return std::nullopt;
  return t.index;
}

std::uint64_t this_task_id() noexcept {
  auto* t = detail::tls().current;
  return t ? t->id() : 0;
}

scoped_scheduler::scoped_scheduler(const scheduler& s) : previous_(detail::tls_binding) {
  detail::tls_binding = s.core();
}

scoped_scheduler::~scoped_scheduler() { detail::tls_binding = std::move(previous_); }

} // namespace amt

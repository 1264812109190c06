#pragma once

#include "amt/agas/agas.hpp"
#include "amt/counters/counters.hpp"
#include "amt/parcel/action.hpp"
#include "amt/parcel/parcelport.hpp"
#include "amt/parcel/transport.hpp"
#include "amt/runtime/config.hpp"
#include "amt/scheduler/scheduler.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string_view>

namespace amt {

/// One locality: scheduler, AGAS, parcel layer, transport and counters.
///
/// Construction validates the config, starts the scheduler and binds the
/// listening socket; start() connects the peers, registers the built-in
/// counters and passes the startup barrier. boot() does both.
class runtime {
 public:
  explicit runtime(runtime_config cfg);
  ~runtime();

  runtime(const runtime&) = delete;
  runtime& operator=(const runtime&) = delete;

  static std::unique_ptr<runtime> boot(runtime_config cfg);

  /// Port the transport listens on (0 for a single locality).
  std::uint16_t bound_port() const noexcept { return bound_port_; }
  /// Fixes a peer's endpoint after construction (ephemeral ports).
  void set_endpoint(std::uint32_t id, std::string host, std::uint16_t port);
  void start();

  std::uint32_t locality() const noexcept { return cfg_.this_locality; }
  std::uint32_t locality_count() const noexcept { return cfg_.locality_count(); }
  const runtime_config& config() const noexcept { return cfg_; }

  amt::scheduler& sched() noexcept { return sched_; }
  agas_service& agas() noexcept { return *agas_; }
  parcelport& parcels() noexcept { return *parcels_; }
  counter_registry& counters() noexcept { return *counters_; }
  /// Null for a single locality.
  tcp_transport* transport() noexcept { return transport_.get(); }

  /// Spawns `f` on this locality's scheduler.
  template <typename F>
  auto spawn(F&& f, task_priority prio = task_priority::normal) {
    return sched_.spawn(std::forward<F>(f), prio);
  }

  /// Invokes the named action on `dest`; the result is converted to R.
  template <typename R = value, typename... Args>
  future<R> apply(const gid& dest, std::string_view action, Args&&... args) {
    const auto* rec = action_registry::instance().find(action);
    if (!rec) {
      return make_exceptional_future<R>(errc::unknown_action,
                                        "unknown action '" + std::string(action) + "'");
    }
    value_list vs{to_value(std::forward<Args>(args))...};
    auto raw = parcels_->apply(dest, rec->id, std::move(vs));
    if constexpr (std::is_same_v<R, value>) {
      return raw;
    } else {
      return detail::map_inline(raw, [](const value& v) { return from_value<R>(v); });
    }
  }

  /// Global rendezvous of all localities, counted at locality 0.
  void barrier();

  /// Asks every other locality to shut down (used by the driver locality)
  /// and waits for their acknowledgements. Afterwards this locality is
  /// stopping too: new applies fail with runtime_shutdown.
  void request_cluster_shutdown();
  /// Blocks until a shutdown request arrives, locality 0 disappears, or
  /// `stop` becomes true.
  void wait_for_shutdown_request(const std::atomic<bool>* stop = nullptr);

  /// Stops the transport, fails pending remote work and drains the
  /// scheduler. Idempotent.
  void shutdown();
  /// Marks the runtime as stopping without tearing anything down, so that
  /// peers leaving a cluster together are not reported as failures.
  void begin_shutdown() noexcept;
  bool stopping() const noexcept { return stopping_.load(std::memory_order_acquire); }

  std::int64_t now_ns() const noexcept;

  // System action bodies.
  void handle_barrier_arrive(std::uint64_t generation);
  void handle_barrier_release(std::uint64_t generation);
  void handle_shutdown_request();
  void handle_peer_lost(std::uint32_t peer);

 private:
  runtime_config cfg_;
  amt::scheduler sched_;
  std::chrono::steady_clock::time_point epoch_;
  std::unique_ptr<agas_service> agas_;
  std::unique_ptr<parcelport> parcels_;
  std::unique_ptr<counter_registry> counters_;
  std::unique_ptr<tcp_transport> transport_;
  std::uint16_t bound_port_ = 0;
  bool started_ = false;
  std::atomic<bool> stopping_{false};
  std::mutex shutdown_mutex_;
  bool shut_down_ = false;

  std::mutex barrier_mutex_;
  std::uint64_t barrier_generation_ = 0;            // barriers entered here
  std::map<std::uint64_t, std::uint32_t> arrivals_; // locality 0 only
  std::uint64_t released_ = 0;
  std::map<std::uint64_t, std::shared_ptr<promise<void>>> barrier_waiters_;

  void fail_barriers(errc code, const std::string& why);

  std::mutex request_mutex_;
  std::condition_variable request_cv_;
  bool shutdown_requested_ = false;
};

/// Registers the runtime's own actions and component types. Idempotent;
/// called by every runtime constructor.
void register_builtin_actions();

} // namespace amt

#include "amt/runtime/runtime.hpp"

#include <spdlog/spdlog.h>

namespace amt {

namespace {

runtime_config validated(runtime_config cfg) {
  cfg.validate();
  return cfg;
}

spdlog::level::level_enum spd_level(log_level l) {
  switch (l) {
    case log_level::trace: return spdlog::level::trace;
    case log_level::debug: return spdlog::level::debug;
    case log_level::info: return spdlog::level::info;
    case log_level::warn: return spdlog::level::warn;
    case log_level::error: return spdlog::level::err;
    case log_level::off: return spdlog::level::off;
  }
  return spdlog::level::warn;
}

const locality_endpoint& endpoint_of(const runtime_config& cfg, std::uint32_t id) {
  for (const auto& e : cfg.localities) {
    if (e.id == id) return e;
  }
  throw_error(errc::boot_failure, "no endpoint for locality " + std::to_string(id));
}

} // namespace

runtime::runtime(runtime_config cfg)
    : cfg_(validated(std::move(cfg))),
      sched_(cfg_.scheduler),
      epoch_(std::chrono::steady_clock::now()) {
  spdlog::set_level(spd_level(cfg_.log));
  register_builtin_actions();
  agas_ = std::make_unique<agas_service>(*this);
  parcels_ = std::make_unique<parcelport>(*this);
  counters_ = std::make_unique<counter_registry>(*this);
  if (locality_count() > 1) {
    transport_ = std::make_unique<tcp_transport>(
        locality(), locality_count(), [this](parcel p) { parcels_->on_frame(std::move(p)); },
        [this](std::uint32_t peer) { handle_peer_lost(peer); });
    parcels_->attach(transport_.get());
    const auto& self = endpoint_of(cfg_, locality());
    bound_port_ = transport_->listen(self.host, self.port);
  }
}

runtime::~runtime() { shutdown(); }

std::unique_ptr<runtime> runtime::boot(runtime_config cfg) {
  auto rt = std::make_unique<runtime>(std::move(cfg));
  rt->start();
  return rt;
}

void runtime::set_endpoint(std::uint32_t id, std::string host, std::uint16_t port) {
  for (auto& e : cfg_.localities) {
    if (e.id == id) {
      e.host = std::move(host);
      e.port = port;
      return;
    }
  }
  throw_error(errc::invalid_argument, "no locality " + std::to_string(id));
}

void runtime::start() {
  if (started_) return;
  started_ = true;
  auto deadline = std::chrono::steady_clock::now() + cfg_.boot_timeout;
  if (transport_) {
    transport_->start_accepting();
    // Every locality dials the ones with lower ids, so each pair shares
    // exactly one connection.
    for (std::uint32_t peer = 0; peer < locality(); ++peer) {
      const auto& ep = endpoint_of(cfg_, peer);
      transport_->connect(peer, ep.host, ep.port, deadline);
    }
    if (!transport_->wait_all_connected(deadline)) {
      throw_error(errc::boot_failure, "locality " + std::to_string(locality()) +
                                          ": timed out waiting for peers to connect");
    }
  }
  counters_->register_builtins();
  barrier();
  spdlog::info("locality {} of {} is up", locality(), locality_count());
}

void runtime::barrier() {
  std::uint64_t gen = 0;
  std::shared_ptr<promise<void>> done;
  {
    std::lock_guard lock(barrier_mutex_);
    gen = ++barrier_generation_;
    if (released_ >= gen) return;
    done = std::make_shared<promise<void>>();
    barrier_waiters_.emplace(gen, done);
  }
  if (locality_count() == 1) {
    handle_barrier_release(gen);
  } else if (locality() == 0) {
    handle_barrier_arrive(gen);
  } else {
    parcels_->post(locality_gid(0), sys::barrier_arrive, {value(static_cast<std::int64_t>(gen))});
  }
  done->get_future().get();
}

void runtime::handle_barrier_arrive(std::uint64_t generation) {
  {
    std::lock_guard lock(barrier_mutex_);
    if (++arrivals_[generation] < locality_count()) return;
    arrivals_.erase(generation);
  }
  for (std::uint32_t l = 1; l < locality_count(); ++l) {
    parcels_->post(locality_gid(l), sys::barrier_release,
                   {value(static_cast<std::int64_t>(generation))});
  }
  handle_barrier_release(generation);
}

void runtime::handle_barrier_release(std::uint64_t generation) {
  std::vector<std::shared_ptr<promise<void>>> ready;
  {
    std::lock_guard lock(barrier_mutex_);
    released_ = std::max(released_, generation);
    while (!barrier_waiters_.empty() && barrier_waiters_.begin()->first <= released_) {
      ready.push_back(std::move(barrier_waiters_.begin()->second));
      barrier_waiters_.erase(barrier_waiters_.begin());
    }
  }
  for (auto& p : ready) p->try_set_value();
}

void runtime::fail_barriers(errc code, const std::string& why) {
  std::vector<std::shared_ptr<promise<void>>> waiting;
  {
    std::lock_guard lock(barrier_mutex_);
    for (auto& [_, p] : barrier_waiters_) waiting.push_back(std::move(p));
    barrier_waiters_.clear();
  }
  auto ep = std::make_exception_ptr(error(code, why));
  for (auto& p : waiting) p->try_set_exception(ep);
}

void runtime::request_cluster_shutdown() {
  // Wait for the acknowledgements so peers are already stopping when this
  // locality disconnects; a peer that is gone already needs no request.
  std::vector<future<value>> acks;
  for (std::uint32_t l = 0; l < locality_count(); ++l) {
    if (l != locality()) acks.push_back(parcels_->apply(locality_gid(l), sys::shutdown_request, {}));
  }
  for (auto& f : acks) {
    try {
      f.get();
    } catch (const error& e) {
      spdlog::debug("locality {}: shutdown request not acknowledged: {}", locality(), e.what());
    }
  }
  begin_shutdown();
}

void runtime::handle_shutdown_request() {
  std::lock_guard lock(request_mutex_);
  shutdown_requested_ = true;
  request_cv_.notify_all();
}

void runtime::wait_for_shutdown_request(const std::atomic<bool>* stop) {
  std::unique_lock lock(request_mutex_);
  while (!shutdown_requested_) {
    if (stop && stop->load(std::memory_order_acquire)) return;
    request_cv_.wait_for(lock, std::chrono::milliseconds(50));
  }
}

void runtime::handle_peer_lost(std::uint32_t peer) {
  if (stopping()) {
    spdlog::debug("locality {}: locality {} left during shutdown", locality(), peer);
  } else {
    spdlog::warn("locality {}: lost connection to locality {}", locality(), peer);
  }
  parcels_->on_peer_lost(peer);
  fail_barriers(errc::transport_error,
                "locality " + std::to_string(peer) + " became unreachable during a barrier");
  if (peer == 0) handle_shutdown_request();  // the driver is gone
}

void runtime::begin_shutdown() noexcept { stopping_.store(true, std::memory_order_release); }

void runtime::shutdown() {
  std::lock_guard lock(shutdown_mutex_);
  if (shut_down_) return;
  shut_down_ = true;
  begin_shutdown();
  if (transport_) transport_->close();
  parcels_->fail_all(errc::runtime_shutdown, "runtime shut down");
  fail_barriers(errc::runtime_shutdown, "runtime shut down");
  handle_shutdown_request();
  sched_.shutdown(true);
}

std::int64_t runtime::now_ns() const noexcept {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                              epoch_)
      .count();
}

} // namespace amt

#pragma once

#include "amt/agas/gid.hpp"
#include "amt/error.hpp"
#include "amt/parcel/action.hpp"
#include "amt/parcel/value.hpp"
#include "amt/parcel/wire.hpp"
#include "amt/tasking/future.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace amt {

class runtime;
class tcp_transport;

/// Active-message layer of one locality: apply, routing, forwarding and
/// continuation bookkeeping. Frames go through the transport; invocations
/// of local objects never touch the wire.
class parcelport {
 public:
  explicit parcelport(runtime& rt);
  ~parcelport();

  /// Invokes `action` on `dest`. Unknown actions and signature mismatches
  /// fail the returned future without sending anything.
  future<value> apply(const gid& dest, std::uint64_t action, value_list args);

  /// Fire-and-forget variant: no continuation, errors are dropped.
  void post(const gid& dest, std::uint64_t action, value_list args);

  /// Relays a parked or stale parcel to `to`, marking it forwarded and
  /// telling the original source where the object lives now.
  void forward(parcel p, std::uint32_t to, std::uint64_t epoch, bool notify_source);

  // Transport hooks.
  void attach(tcp_transport* transport) noexcept { transport_ = transport; }
  /// Called on a reader thread for every decoded frame.
  void on_frame(parcel p);
  /// Fails every pending continuation that waits on `peer`.
  void on_peer_lost(std::uint32_t peer);
  /// Fails everything still pending; used at shutdown.
  void fail_all(errc code, const std::string& why);

  std::int64_t forwarded() const noexcept { return forwarded_.load(std::memory_order_relaxed); }
  std::int64_t local_invocations() const noexcept {
    return local_invocations_.load(std::memory_order_relaxed);
  }
  std::size_t pending_continuations() const;

 private:
  struct pending {
    promise<value> result;
    std::uint32_t peer;
  };

  gid register_continuation(promise<value> result);
  void note_peer(const gid& cont, std::uint32_t peer);
  void complete_continuation(const gid& cont, std::exception_ptr err, value v);

  /// `arrived` marks parcels that came off the wire (or were parked): they
  /// already run inside a task and count as forwarded when relayed.
  void route(parcel p, bool arrived);
  void transmit(std::uint32_t to, parcel p);
  void dispatch_here(parcel p);
  void deliver(parcel p);
  void spawn_execute(parcel p, std::shared_ptr<component> obj);
  void execute(parcel p, std::shared_ptr<component> obj);
  void run_local(const action_record& rec, const gid& dest, std::shared_ptr<component> obj,
                 value_list args, promise<value> result);

  void reply_value(const parcel& req, value v);
  void reply_error(const parcel& req, errc code, const std::string& what);
  void reply_exception(const parcel& req, std::exception_ptr ep);

  runtime& rt_;
  std::uint32_t self_;
  tcp_transport* transport_ = nullptr;

  mutable std::mutex cont_mutex_;
  std::unordered_map<gid, pending> continuations_;
  std::atomic<std::uint64_t> next_cont_{2};
  bool closed_ = false;

  std::atomic<std::int64_t> forwarded_{0};
  std::atomic<std::int64_t> local_invocations_{0};
};

} // namespace amt

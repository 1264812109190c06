#include "amt/parcel/parcelport.hpp"

#include "amt/agas/agas.hpp"
#include "amt/parcel/transport.hpp"
#include "amt/runtime/runtime.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace amt {

namespace {

// Runtime protocol traffic must not show up in the task counts it helps to
// observe, so system actions run as instrumentation tasks.
task_kind kind_of(std::uint64_t action) {
  return is_system_action(action) ? task_kind::instrumentation : task_kind::application;
}

bool is_continuation_gid(const gid& g) { return g.generation == 0 && g.sequence >= 2; }

std::vector<std::uint8_t> encode_args(value_list args) {
  return encode_value(value(std::move(args)));
}

value_list decode_args(const parcel& p) {
  auto v = decode_value(p.payload);
  if (v.tag() != value_tag::list) throw_error(errc::decode_error, "payload is not an argument list");
  return std::move(v.as_list());
}

/// Wire form of an error: (code, message). Foreign exceptions become
/// action_failed so every failure has a code.
std::pair<errc, std::string> classify(const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const error& e) {
    return {e.code(), e.what()};
  } catch (const std::exception& e) {
    return {errc::action_failed, e.what()};
  } catch (...) {
    return {errc::action_failed, "handler threw a non-standard exception"};
  }
}

std::exception_ptr normalize(const std::exception_ptr& ep) {
  auto [code, what] = classify(ep);
  return std::make_exception_ptr(error(code, what));
}

} // namespace

parcelport::parcelport(runtime& rt) : rt_(rt), self_(rt.locality()) {}

parcelport::~parcelport() = default;

std::size_t parcelport::pending_continuations() const {
  std::lock_guard lock(cont_mutex_);
  return continuations_.size();
}

gid parcelport::register_continuation(promise<value> result) {
  gid c{self_, 0, next_cont_.fetch_add(1, std::memory_order_relaxed)};
  std::lock_guard lock(cont_mutex_);
  if (closed_) throw_error(errc::runtime_shutdown, "runtime is shutting down");
  continuations_.emplace(c, pending{std::move(result), self_});
  return c;
}

void parcelport::note_peer(const gid& cont, std::uint32_t peer) {
  std::lock_guard lock(cont_mutex_);
  if (auto it = continuations_.find(cont); it != continuations_.end()) it->second.peer = peer;
}

void parcelport::complete_continuation(const gid& cont, std::exception_ptr err, value v) {
  std::optional<promise<value>> result;
  {
    std::lock_guard lock(cont_mutex_);
    auto it = continuations_.find(cont);
    if (it == continuations_.end()) return;  // already failed (peer loss, shutdown)
    result = std::move(it->second.result);
    continuations_.erase(it);
  }
  if (err) {
    result->try_set_exception(err);
  } else {
    result->try_set_value(std::move(v));
  }
}

void parcelport::on_peer_lost(std::uint32_t peer) {
  std::vector<promise<value>> lost;
  {
    std::lock_guard lock(cont_mutex_);
    for (auto it = continuations_.begin(); it != continuations_.end();) {
      if (it->second.peer == peer) {
        lost.push_back(std::move(it->second.result));
        it = continuations_.erase(it);
      } else {
        ++it;
      }
    }
  }
  auto ep = std::make_exception_ptr(
      error(errc::transport_error, "locality " + std::to_string(peer) + " became unreachable"));
  for (auto& p : lost) p.try_set_exception(ep);
}

void parcelport::fail_all(errc code, const std::string& why) {
  std::vector<promise<value>> all;
  {
    std::lock_guard lock(cont_mutex_);
    closed_ = true;
    for (auto& [_, pend] : continuations_) all.push_back(std::move(pend.result));
    continuations_.clear();
  }
  auto ep = std::make_exception_ptr(error(code, why));
  for (auto& p : all) p.try_set_exception(ep);
}

future<value> parcelport::apply(const gid& dest, std::uint64_t action, value_list args) {
  const auto* rec = action_registry::instance().find(action);
  if (!rec) {
    return make_exceptional_future<value>(errc::unknown_action,
                                          fmt::format("unknown action id {:#x}", action));
  }
  try {
    check_signature(rec->signature, args);
  } catch (...) {
    return make_exceptional_future<value>(std::current_exception());
  }
  if (dest.is_null()) return make_exceptional_future<value>(errc::invalid_argument, "apply to the null GID");
  if (rt_.stopping()) {
    return make_exceptional_future<value>(errc::runtime_shutdown, "runtime is shutting down");
  }

  promise<value> result;
  auto fut = result.get_future();

  // Local short-circuit: no encoding, no frame.
  if (is_locality_gid(dest)) {
    if (dest.home == self_) {
      run_local(*rec, dest, nullptr, std::move(args), std::move(result));
      return fut;
    }
  } else if (auto obj = rt_.agas().acquire_local(dest)) {
    run_local(*rec, dest, std::move(obj), std::move(args), std::move(result));
    return fut;
  }

  parcel p;
  p.dest = dest;
  p.action_id = action;
  p.source_locality = self_;
  p.payload = encode_args(std::move(args));
  try {
    p.continuation = register_continuation(result);
  } catch (...) {
    return make_exceptional_future<value>(std::current_exception());
  }
  route(std::move(p), false);
  return fut;
}

void parcelport::post(const gid& dest, std::uint64_t action, value_list args) {
  parcel p;
  p.dest = dest;
  p.action_id = action;
  p.source_locality = self_;
  p.payload = encode_args(std::move(args));
  route(std::move(p), false);
}

void parcelport::run_local(const action_record& rec, const gid& dest,
                           std::shared_ptr<component> obj, value_list args,
                           promise<value> result) {
  local_invocations_.fetch_add(1, std::memory_order_relaxed);
  bool has_obj = obj != nullptr;
  bool ok = rt_.sched().submit(
      [this, &rec, dest, obj, args = std::move(args), result]() mutable {
        try {
          if ((rec.target == action_target::object) != (obj != nullptr)) {
            throw_error(errc::wrong_component,
                        "action '" + rec.name + "' cannot run on " + dest.to_string());
          }
          action_context ctx{rt_, dest, obj, self_};
          result.try_set_value(rec.handler(ctx, args));
        } catch (...) {
          result.try_set_exception(normalize(std::current_exception()));
        }
        if (obj) rt_.agas().release(dest);
      },
      task_priority::normal, std::nullopt, kind_of(rec.id));
  if (!ok) {
    if (has_obj) rt_.agas().release(dest);
    result.try_set_exception(
        std::make_exception_ptr(error(errc::runtime_shutdown, "runtime is shutting down")));
  }
}

void parcelport::route(parcel p, bool arrived) {
  if (is_locality_gid(p.dest) || is_continuation_gid(p.dest)) {
    auto to = p.dest.home;
    transmit(to, std::move(p));
    return;
  }
  auto d = rt_.agas().route(p);
  using kind = route_decision::kind;
  switch (d.what) {
    case kind::run_here:
      if (arrived) {
        execute(std::move(p), std::move(d.object));
      } else {
        spawn_execute(std::move(p), std::move(d.object));
      }
      return;
    case kind::queued:
      return;
    case kind::not_found:
      reply_error(p, errc::not_found, "object " + p.dest.to_string() + " is not registered");
      return;
    case kind::send:
      if (arrived) {
        forward(std::move(p), d.locality, d.epoch, true);
      } else {
        transmit(d.locality, std::move(p));
      }
      return;
    case kind::ask_home:
      if (arrived) {
        // A stale owner without a forwarding hint defers to the authority.
        auto home = p.dest.home;
        forward(std::move(p), home, 0, false);
        return;
      }
      break;
  }
  auto held = std::make_shared<parcel>(std::move(p));
  auto res = rt_.agas().resolve(held->dest);
  res.state()->on_ready([this, held, res] {
    if (res.has_exception()) {
      reply_exception(*held, res.exception());
    } else if (res.get().locality == self_) {
      route(std::move(*held), false);  // it arrived here meanwhile
    } else {
      transmit(res.get().locality, std::move(*held));
    }
  });
}

void parcelport::transmit(std::uint32_t to, parcel p) {
  if (to == self_) {
    dispatch_here(std::move(p));
    return;
  }
  if (p.continuation.home == self_ && !p.forwarded) note_peer(p.continuation, to);
  try {
    if (!transport_) {
      throw_error(errc::transport_error, "no transport to locality " + std::to_string(to));
    }
    if (to >= rt_.locality_count()) {
      throw_error(errc::not_found, "no locality " + std::to_string(to));
    }
    transport_->send(to, p);
  } catch (...) {
    reply_exception(p, std::current_exception());
  }
}

void parcelport::forward(parcel p, std::uint32_t to, std::uint64_t epoch, bool notify_source) {
  if (to == self_) {
    dispatch_here(std::move(p));
    return;
  }
  forwarded_.fetch_add(1, std::memory_order_relaxed);
  p.forwarded = true;
  if (notify_source && p.source_locality != self_) {
    post(locality_gid(p.source_locality), sys::cache_update,
         {to_value(p.dest), value(static_cast<std::int64_t>(to)),
          value(static_cast<std::int64_t>(epoch))});
  }
  transmit(to, std::move(p));
}

void parcelport::on_frame(parcel p) {
  auto kind = kind_of(p.action_id);
  auto held = std::make_shared<parcel>(std::move(p));
  if (!rt_.sched().submit([this, held]() mutable { deliver(std::move(*held)); },
                          task_priority::normal, std::nullopt, kind)) {
    spdlog::debug("locality {}: dropped frame for {} during shutdown", self_,
                  held->dest.to_string());
  }
}

void parcelport::dispatch_here(parcel p) {
  on_frame(std::move(p));
}

void parcelport::deliver(parcel p) {
  if (p.action_id == sys::continuation_set || p.action_id == sys::continuation_error) {
    try {
      auto args = decode_args(p);
      if (p.action_id == sys::continuation_set) {
        complete_continuation(p.dest, nullptr, std::move(args.at(0)));
      } else {
        auto code = static_cast<errc>(args.at(0).as_int64());
        complete_continuation(p.dest, std::make_exception_ptr(error(code, args.at(1).as_bytes())),
                              value());
      }
    } catch (const std::exception& e) {
      complete_continuation(p.dest,
                            std::make_exception_ptr(error(errc::decode_error, e.what())), value());
    }
    return;
  }
  if (is_locality_gid(p.dest)) {
    if (p.dest.home != self_) {
      reply_error(p, errc::wrong_locality,
                  "parcel for locality " + std::to_string(p.dest.home) + " arrived at " +
                      std::to_string(self_));
      return;
    }
    execute(std::move(p), nullptr);
    return;
  }
  route(std::move(p), true);
}

void parcelport::spawn_execute(parcel p, std::shared_ptr<component> obj) {
  auto kind = kind_of(p.action_id);
  auto held = std::make_shared<parcel>(std::move(p));
  if (!rt_.sched().submit([this, held, obj]() mutable { execute(std::move(*held), obj); },
                          task_priority::normal, std::nullopt, kind)) {
    if (obj) rt_.agas().release(held->dest);
    reply_error(*held, errc::runtime_shutdown, "runtime is shutting down");
  }
}

void parcelport::execute(parcel p, std::shared_ptr<component> obj) {
  const auto* rec = action_registry::instance().find(p.action_id);
  try {
    if (!rec) throw_error(errc::unknown_action, fmt::format("unknown action id {:#x}", p.action_id));
    auto args = decode_args(p);
    check_signature(rec->signature, args);
    if ((rec->target == action_target::object) != (obj != nullptr)) {
      throw_error(errc::wrong_component,
                  "action '" + rec->name + "' cannot run on " + p.dest.to_string());
    }
    action_context ctx{rt_, p.dest, obj, p.source_locality};
    auto result = rec->handler(ctx, args);
    if (obj) rt_.agas().release(p.dest);
    obj.reset();
    reply_value(p, std::move(result));
  } catch (...) {
    if (obj) rt_.agas().release(p.dest);
    reply_exception(p, std::current_exception());
  }
}

void parcelport::reply_value(const parcel& req, value v) {
  const gid& c = req.continuation;
  if (c.is_null()) return;
  if (c.home == self_) {
    complete_continuation(c, nullptr, std::move(v));
    return;
  }
  parcel r;
  r.dest = c;
  r.action_id = sys::continuation_set;
  r.source_locality = self_;
  r.payload = encode_args(value_list{std::move(v)});
  transmit(c.home, std::move(r));
}

void parcelport::reply_error(const parcel& req, errc code, const std::string& what) {
  const gid& c = req.continuation;
  if (c.is_null()) {
    spdlog::debug("locality {}: dropped error for fire-and-forget parcel: {}", self_, what);
    return;
  }
  if (c.home == self_) {
    complete_continuation(c, std::make_exception_ptr(error(code, what)), value());
    return;
  }
  parcel r;
  r.dest = c;
  r.action_id = sys::continuation_error;
  r.source_locality = self_;
  r.payload = encode_args(value_list{value(static_cast<std::int64_t>(code)), value(what)});
  transmit(c.home, std::move(r));
}

void parcelport::reply_exception(const parcel& req, std::exception_ptr ep) {
  auto [code, what] = classify(ep);
  reply_error(req, code, what);
}

} // namespace amt

#include "amt/agas/agas.hpp"

#include "amt/runtime/runtime.hpp"

#include <spdlog/spdlog.h>

#include <thread>

namespace amt {

namespace {

std::string where(const gid& g) { return "object " + g.to_string(); }

} // namespace

agas_service::agas_service(runtime& rt) : rt_(rt), self_(rt.locality()) {}

void agas_service::check_name(const std::string& name) {
  if (name.empty() || name.front() != '/') {
    throw_error(errc::invalid_argument, "name '" + name + "' must begin with '/'");
  }
  if (name.size() > 255) throw_error(errc::invalid_argument, "name longer than 255 bytes");
  for (unsigned char c : name) {
    if (c < 0x21 || c > 0x7e) {
      throw_error(errc::invalid_argument, "name '" + name + "' has a non-printable character");
    }
  }
}

gid agas_service::register_object(std::shared_ptr<component> obj) {
  if (rt_.stopping()) throw_error(errc::runtime_shutdown, "registration during shutdown");
  if (!obj) throw_error(errc::invalid_argument, "cannot register a null object");
  gid g{self_, rt_.config().agas_generation,
        next_sequence_.fetch_add(1, std::memory_order_relaxed)};
  {
    std::lock_guard lock(objects_mutex_);
    objects_[g] = object_entry{std::move(obj)};
  }
  std::lock_guard lock(authority_mutex_);
  authority_[g] = location{self_, 0, {}};
  return g;
}

future<void> agas_service::unregister(const gid& g) {
  {
    std::lock_guard lock(objects_mutex_);
    auto it = objects_.find(g);
    if (it == objects_.end()) {
      return make_exceptional_future<void>(
          errc::wrong_locality, where(g) + " does not live on locality " + std::to_string(self_));
    }
    if (it->second.migrating) {
      return make_exceptional_future<void>(errc::busy, where(g) + " is migrating");
    }
    objects_.erase(it);
  }
  if (g.home == self_) {
    handle_authority_remove(g);
    return make_ready_future();
  }
  return detail::map_inline(
      rt_.parcels().apply(locality_gid(g.home), sys::authority_remove, {to_value(g)}),
      [](const value&) {});
}

std::shared_ptr<component> agas_service::local_object(const gid& g) const {
  std::lock_guard lock(objects_mutex_);
  auto it = objects_.find(g);
  if (it == objects_.end() || it->second.migrating) return nullptr;
  return it->second.obj;
}

std::optional<agas_service::location> agas_service::authority_row(const gid& g) const {
  std::lock_guard lock(authority_mutex_);
  auto it = authority_.find(g);
  if (it == authority_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> agas_service::cached_locality(const gid& g) const {
  std::lock_guard lock(cache_mutex_);
  auto it = cache_.find(g);
  if (it == cache_.end()) return std::nullopt;
  return it->second.locality;
}

void agas_service::clear_cache() {
  std::lock_guard lock(cache_mutex_);
  cache_.clear();
}

void agas_service::update_cache(const gid& g, std::uint32_t locality, std::uint64_t epoch) {
  std::lock_guard lock(cache_mutex_);
  auto it = cache_.find(g);
  if (it == cache_.end() || epoch >= it->second.epoch) {
    cache_[g] = location{locality, epoch, std::chrono::steady_clock::now()};
  }
}

std::int64_t agas_service::live_objects() const {
  std::lock_guard lock(objects_mutex_);
  return static_cast<std::int64_t>(objects_.size());
}

future<agas_service::location> agas_service::query_home(const gid& g) {
  if (g.home >= rt_.locality_count()) {
    return make_exceptional_future<location>(errc::not_found,
                                             where(g) + " has an unknown home locality");
  }
  return detail::map_inline(
      rt_.parcels().apply(locality_gid(g.home), sys::resolve, {to_value(g)}),
      [this, g](const value& v) {
        const auto& xs = v.as_list();
        location l{static_cast<std::uint32_t>(xs.at(0).as_int64()),
                   static_cast<std::uint64_t>(xs.at(1).as_int64()), {}};
        update_cache(g, l.locality, l.epoch);
        return l;
      });
}

future<resolution> agas_service::resolve(const gid& g) {
  if (g.is_null()) {
    return make_exceptional_future<resolution>(errc::invalid_argument, "resolve of the null GID");
  }
  {
    std::lock_guard lock(objects_mutex_);
    if (auto it = objects_.find(g); it != objects_.end()) {
      return make_ready_future(resolution{self_, it->second.obj});
    }
  }
  if (g.home == self_) {
    auto row = authority_row(g);
    if (!row || row->locality == self_) {
      return make_exceptional_future<resolution>(errc::not_found, where(g) + " is not registered");
    }
    return make_ready_future(resolution{row->locality, nullptr});
  }
  // Resolution is answered by the authority, not the routing cache, so every
  // locality reports the same owner once a migration has completed. The
  // answer refreshes the cache as a side effect.
  return detail::map_inline(query_home(g),
                            [](const location& l) { return resolution{l.locality, nullptr}; });
}

route_decision agas_service::route(parcel& p) {
  using kind = route_decision::kind;
  const gid& g = p.dest;
  {
    std::lock_guard lock(objects_mutex_);
    if (auto it = objects_.find(g); it != objects_.end()) {
      auto& e = it->second;
      if (e.migrating) {
        e.parked.push_back(std::move(p));
        return {kind::queued};
      }
      ++e.in_flight;
      return {kind::run_here, e.obj};
    }
  }
  if (g.home == self_) {
    auto row = authority_row(g);
    if (!row || row->locality == self_) return {kind::not_found};
    return {kind::send, nullptr, row->locality, row->epoch, true};
  }
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = cache_.find(g); it != cache_.end()) {
      if (it->second.locality != self_) {
        return {kind::send, nullptr, it->second.locality, it->second.epoch, false};
      }
      cache_.erase(it);
    }
  }
  return {kind::ask_home};
}

std::shared_ptr<component> agas_service::acquire_local(const gid& g) {
  std::lock_guard lock(objects_mutex_);
  auto it = objects_.find(g);
  if (it == objects_.end() || it->second.migrating) return nullptr;
  ++it->second.in_flight;
  return it->second.obj;
}

void agas_service::release(const gid& g) {
  std::shared_ptr<promise<void>> drained;
  {
    std::lock_guard lock(objects_mutex_);
    auto it = objects_.find(g);
    if (it == objects_.end()) return;
    auto& e = it->second;
    if (e.in_flight > 0 && --e.in_flight == 0 && e.drained) drained = std::move(e.drained);
  }
  if (drained) drained->set_value();
}

// Names live on locality 0.

future<void> agas_service::register_name(const std::string& name, const gid& g) {
  try {
    check_name(name);
  } catch (...) {
    return make_exceptional_future<void>(std::current_exception());
  }
  if (self_ == 0) return detail::ready_from([&] { handle_name_register(name, g); });
  return detail::map_inline(
      rt_.parcels().apply(locality_gid(0), sys::name_register, {value(name), to_value(g)}),
      [](const value&) {});
}

future<gid> agas_service::resolve_name(const std::string& name) {
  if (self_ == 0) return detail::ready_from([&] { return handle_name_resolve(name); });
  return detail::map_inline(rt_.parcels().apply(locality_gid(0), sys::name_resolve, {value(name)}),
                            [](const value& v) { return from_value<gid>(v); });
}

future<void> agas_service::unregister_name(const std::string& name) {
  if (self_ == 0) return detail::ready_from([&] { handle_name_unregister(name); });
  return detail::map_inline(
      rt_.parcels().apply(locality_gid(0), sys::name_unregister, {value(name)}),
      [](const value&) {});
}

future<std::vector<std::string>> agas_service::list_names(const std::string& prefix) {
  if (self_ == 0) return detail::ready_from([&] { return handle_name_list(prefix); });
  return detail::map_inline(
      rt_.parcels().apply(locality_gid(0), sys::name_list, {value(prefix)}),
      [](const value& v) { return from_value<std::vector<std::string>>(v); });
}

void agas_service::handle_name_register(const std::string& name, const gid& g) {
  check_name(name);
  if (g.is_null()) throw_error(errc::invalid_argument, "cannot name the null GID");
  std::lock_guard lock(names_mutex_);
  if (!names_.emplace(name, g).second) {
    throw_error(errc::already_exists, "name '" + name + "' is already registered");
  }
}

gid agas_service::handle_name_resolve(const std::string& name) {
  std::lock_guard lock(names_mutex_);
  auto it = names_.find(name);
  if (it == names_.end()) throw_error(errc::not_found, "name '" + name + "' is not registered");
  return it->second;
}

void agas_service::handle_name_unregister(const std::string& name) {
  std::lock_guard lock(names_mutex_);
  if (names_.erase(name) == 0) {
    throw_error(errc::not_found, "name '" + name + "' is not registered");
  }
}

std::vector<std::string> agas_service::handle_name_list(const std::string& prefix) {
  std::vector<std::string> out;
  std::lock_guard lock(names_mutex_);
  for (auto it = names_.lower_bound(prefix); it != names_.end() && it->first.starts_with(prefix);
       ++it) {
    out.push_back(it->first);
  }
  return out;
}

value agas_service::handle_resolve(const gid& g) {
  auto row = authority_row(g);
  if (!row) throw_error(errc::not_found, where(g) + " is not registered");
  return value(value_list{value(static_cast<std::int64_t>(row->locality)),
                          value(static_cast<std::int64_t>(row->epoch))});
}

void agas_service::handle_authority_update(const gid& g, std::uint32_t locality,
                                           std::uint64_t epoch) {
  std::lock_guard lock(authority_mutex_);
  auto it = authority_.find(g);
  if (it == authority_.end()) throw_error(errc::not_found, where(g) + " has no authority row");
  if (epoch > it->second.epoch) it->second = location{locality, epoch, {}};
}

void agas_service::handle_authority_remove(const gid& g) {
  std::lock_guard lock(authority_mutex_);
  authority_.erase(g);
}

// Migration.

future<void> agas_service::migrate(const gid& g, std::uint32_t dest) {
  if (g.is_null()) return make_exceptional_future<void>(errc::invalid_argument, "null GID");
  if (dest >= rt_.locality_count()) {
    return make_exceptional_future<void>(errc::invalid_argument,
                                         "no locality " + std::to_string(dest));
  }
  return rt_.spawn([this, g, dest] {
    // The object may move while we chase it; each miss re-reads the authority.
    for (int attempt = 0; attempt < 64; ++attempt) {
      bool local = false;
      {
        std::lock_guard lock(objects_mutex_);
        local = objects_.count(g) != 0;
      }
      if (local) {
        migrate_local(g, dest);
        return;
      }
      std::uint32_t owner = 0;
      if (g.home == self_) {
        auto row = authority_row(g);
        if (!row) throw_error(errc::not_found, where(g) + " is not registered");
        owner = row->locality;
      } else {
        owner = query_home(g).get().locality;
      }
      if (owner != self_) {
        try {
          rt_.parcels()
              .apply(locality_gid(owner), sys::migrate_request, {to_value(g), value(dest)})
              .get();
          return;
        } catch (const error& e) {
          if (e.code() != errc::wrong_locality) throw;
        }
      }
      std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
    throw_error(errc::busy, where(g) + " kept moving; migration gave up");
  });
}

void agas_service::handle_migrate_request(const gid& g, std::uint32_t dest) {
  if (dest >= rt_.locality_count()) {
    throw_error(errc::invalid_argument, "no locality " + std::to_string(dest));
  }
  migrate_local(g, dest);
}

void agas_service::migrate_local(const gid& g, std::uint32_t dest) {
  std::shared_ptr<component> obj;
  std::shared_ptr<promise<void>> drained;
  std::uint64_t epoch = 0;
  {
    // Step 1: stop admitting invocations; new ones are parked.
    std::lock_guard lock(objects_mutex_);
    auto it = objects_.find(g);
    if (it == objects_.end()) {
      throw_error(errc::wrong_locality,
                  where(g) + " does not live on locality " + std::to_string(self_));
    }
    auto& e = it->second;
    if (dest == self_) return;
    if (e.migrating) throw_error(errc::busy, where(g) + " is already migrating");
    e.migrating = true;
    epoch = e.epoch + 1;
    obj = e.obj;
    if (e.in_flight > 0) {
      drained = std::make_shared<promise<void>>();
      e.drained = drained;
    }
  }
  if (drained) drained->get_future().get();

  try {
    // Steps 2-3: ship the state; the destination installs a live handle.
    auto state = obj->serialize();
    rt_.parcels()
        .apply(locality_gid(dest), sys::migrate_install,
               {to_value(g), value(obj->type_name()), state, value(static_cast<std::int64_t>(epoch))})
        .get();
  } catch (...) {
    abort_migration(g);
    throw;
  }

  // Step 4: the authority row follows the object.
  try {
    if (g.home == self_) {
      handle_authority_update(g, dest, epoch);
    } else {
      rt_.parcels()
          .apply(locality_gid(g.home), sys::authority_update,
                 {to_value(g), value(dest), value(static_cast<std::int64_t>(epoch))})
          .get();
    }
  } catch (const std::exception& e) {
    // The object already lives at dest; forwarding from here still works.
    spdlog::warn("locality {}: authority update for {} failed: {}", self_, g.to_string(),
                 e.what());
  }

  // Step 5: point stragglers at dest, drop the handle, replay the queue.
  update_cache(g, dest, epoch);
  std::vector<parcel> parked;
  {
    std::lock_guard lock(objects_mutex_);
    auto it = objects_.find(g);
    parked = std::move(it->second.parked);
    objects_.erase(it);
  }
  migrations_.fetch_add(1, std::memory_order_relaxed);
  for (auto& p : parked) rt_.parcels().forward(std::move(p), dest, epoch, true);
}

void agas_service::abort_migration(const gid& g) {
  std::vector<parcel> parked;
  {
    std::lock_guard lock(objects_mutex_);
    auto it = objects_.find(g);
    if (it == objects_.end()) return;
    it->second.migrating = false;
    parked = std::move(it->second.parked);
  }
  for (auto& p : parked) rt_.parcels().forward(std::move(p), self_, 0, false);
}

void agas_service::handle_migrate_install(const gid& g, const std::string& type,
                                          const value& state, std::uint64_t epoch) {
  auto obj = make_component(type, state);
  {
    std::lock_guard lock(objects_mutex_);
    if (objects_.count(g)) throw_error(errc::already_exists, where(g) + " is already here");
    object_entry e;
    e.obj = std::move(obj);
    e.epoch = epoch;
    objects_.emplace(g, std::move(e));
  }
  std::lock_guard lock(cache_mutex_);
  cache_.erase(g);
}

} // namespace amt

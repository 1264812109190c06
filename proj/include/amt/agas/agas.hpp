#pragma once

#include "amt/agas/component.hpp"
#include "amt/agas/gid.hpp"
#include "amt/parcel/wire.hpp"
#include "amt/tasking/future.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace amt {

class runtime;

struct resolution {
  std::uint32_t locality = 0;
  std::shared_ptr<component> object;  ///< set only when the object is local
};

/// Where the parcel layer should take an invocation for a GID.
struct route_decision {
  enum class kind {
    run_here,   ///< object is live here; in-flight count taken, call release()
    queued,     ///< object is migrating away; the parcel was parked
    send,       ///< relay to `locality`
    ask_home,   ///< no local knowledge; resolve through the home locality
    not_found,  ///< the authoritative answer is: no such object
  };
  kind what = kind::not_found;
  std::shared_ptr<component> object;
  std::uint32_t locality = 0;
  std::uint64_t epoch = 0;
  bool authoritative = false;  ///< `locality` came from the authority row
};

/// Active Global Address Space service of one locality.
///
/// Holds the live objects of this locality, the authority rows of GIDs homed
/// here, a resolution cache for foreign GIDs and, on locality 0, the name
/// service. Cross-locality steps travel as system parcels.
class agas_service {
 public:
  explicit agas_service(runtime& rt);

  /// Mints a fresh GID homed here and makes `obj` resolvable immediately.
  gid register_object(std::shared_ptr<component> obj);

  /// Removes a live local object and its authority row. Fails with
  /// wrong_locality if the object does not live here.
  future<void> unregister(const gid& g);

  future<resolution> resolve(const gid& g);

  future<void> register_name(const std::string& name, const gid& g);
  future<gid> resolve_name(const std::string& name);
  future<void> unregister_name(const std::string& name);
  /// All names starting with `prefix`, lexicographically sorted.
  future<std::vector<std::string>> list_names(const std::string& prefix);

  /// Moves the object to `dest` (queue-and-replay). Completes once the
  /// source has replayed everything it queued.
  future<void> migrate(const gid& g, std::uint32_t dest);

  /// Live local object, or null.
  std::shared_ptr<component> local_object(const gid& g) const;

  std::optional<std::uint32_t> cached_locality(const gid& g) const;
  void clear_cache();

  std::int64_t live_objects() const;
  std::int64_t migrations() const noexcept { return migrations_.load(std::memory_order_relaxed); }

  // Parcel-layer hooks.

  /// Decides where `p` goes. May move `p` into a migration queue.
  route_decision route(parcel& p);
  /// Live local object with its in-flight count taken, or null. Used by
  /// the local short-circuit, which never parks anything.
  std::shared_ptr<component> acquire_local(const gid& g);
  void release(const gid& g);
  /// Applies a forward-notice: `g` now lives on `locality` as of `epoch`.
  void update_cache(const gid& g, std::uint32_t locality, std::uint64_t epoch);

  // System action bodies, run on the locality addressed by the parcel.

  value handle_resolve(const gid& g);
  void handle_name_register(const std::string& name, const gid& g);
  gid handle_name_resolve(const std::string& name);
  void handle_name_unregister(const std::string& name);
  std::vector<std::string> handle_name_list(const std::string& prefix);
  void handle_migrate_request(const gid& g, std::uint32_t dest);
  void handle_migrate_install(const gid& g, const std::string& type, const value& state,
                              std::uint64_t epoch);
  void handle_authority_update(const gid& g, std::uint32_t locality, std::uint64_t epoch);
  void handle_authority_remove(const gid& g);

  /// Validates a symbolic name; throws invalid_argument.
  static void check_name(const std::string& name);

 private:
  struct object_entry {
    std::shared_ptr<component> obj;
    bool migrating = false;
    std::uint64_t epoch = 0;
    std::uint32_t in_flight = 0;
    std::vector<parcel> parked;
    std::shared_ptr<promise<void>> drained;
  };

  struct location {
    std::uint32_t locality = 0;
    std::uint64_t epoch = 0;
    std::chrono::steady_clock::time_point cached_at{};
  };

  void migrate_local(const gid& g, std::uint32_t dest);
  void abort_migration(const gid& g);
  future<location> query_home(const gid& g);
  std::optional<location> authority_row(const gid& g) const;

  runtime& rt_;
  std::uint32_t self_;

  mutable std::mutex objects_mutex_;
  std::unordered_map<gid, object_entry> objects_;

  mutable std::mutex authority_mutex_;
  std::unordered_map<gid, location> authority_;

  mutable std::mutex cache_mutex_;
  std::unordered_map<gid, location> cache_;

  mutable std::mutex names_mutex_;
  std::map<std::string, gid, std::less<>> names_;

  std::atomic<std::uint64_t> next_sequence_{1};
  std::atomic<std::int64_t> migrations_{0};
};

} // namespace amt

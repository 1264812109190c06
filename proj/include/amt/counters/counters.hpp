#pragma once

#include "amt/agas/component.hpp"
#include "amt/agas/gid.hpp"
#include "amt/tasking/future.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace amt {

class runtime;

enum class counter_kind { monotonic, gauge };

struct counter_descriptor {
  std::string name;
  counter_kind kind = counter_kind::monotonic;
  std::function<std::int64_t()> sampler;  ///< must be safe to call concurrently
};

enum class counter_status { ok, unavailable };

struct counter_value {
  std::int64_t value = 0;
  std::int64_t sampled_at_ns = 0;  ///< since the owning runtime's epoch
  counter_status status = counter_status::unavailable;
};

/// Parsed counter path: /component/locality#L[/(worker|peer)#N]/metric...
struct counter_path {
  std::string component;
  std::uint32_t locality = 0;
  std::optional<std::pair<std::string, std::uint32_t>> instance;  ///< e.g. {"worker", 2}
  std::vector<std::string> metric;  ///< may end in cumulative|instantaneous

  std::string str() const;
};

/// Parses a counter name; throws invalid_argument naming the problem.
counter_path parse_counter_path(std::string_view name);

/// Counter source living in AGAS; queried through the sample action.
class counter_source final : public component {
 public:
  explicit counter_source(counter_descriptor desc) : desc_(std::move(desc)) {}

  std::string type_name() const override { return "amt/counter"; }

  const std::string& name() const noexcept { return desc_.name; }
  counter_kind kind() const noexcept { return desc_.kind; }

  std::int64_t sample() const { return desc_.sampler() - baseline_.load(std::memory_order_acquire); }
  /// Subsequent samples report deltas from now. Gauges throw unsupported.
  void reset();

 private:
  counter_descriptor desc_;
  std::atomic<std::int64_t> baseline_{0};
};

/// Registration, discovery and querying of performance counters.
class counter_registry {
 public:
  explicit counter_registry(runtime& rt) : rt_(rt) {}

  /// Registers the counter on this locality and publishes its name.
  future<gid> register_counter(counter_descriptor desc);

  /// Samples a counter wherever it lives. Unknown names yield status
  /// unavailable rather than an error.
  future<counter_value> query(const std::string& name);

  future<std::vector<std::string>> list(const std::string& prefix);

  future<void> reset(const std::string& name);

  /// Registers this locality's scheduler, parcel and AGAS counters.
  void register_builtins();

 private:
  future<gid> lookup(const std::string& name);

  runtime& rt_;
  std::mutex cache_mutex_;
  std::map<std::string, gid, std::less<>> name_cache_;
};

} // namespace amt

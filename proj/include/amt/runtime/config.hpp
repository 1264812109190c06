#pragma once

#include "amt/scheduler/config.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace amt {

struct locality_endpoint {
  std::uint32_t id = 0;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  ///< 0 picks an ephemeral port (in-process clusters)
};

enum class log_level { trace, debug, info, warn, error, off };

log_level parse_log_level(std::string_view s);
std::string_view to_string(log_level l) noexcept;

struct runtime_config {
  /// Locality table; ids must be dense 0..N-1. Empty means a single
  /// locality with no transport.
  std::vector<locality_endpoint> localities;
  std::uint32_t this_locality = 0;
  scheduler_config scheduler{policy_kind::local_priority, 4, 2};
  log_level log = log_level::warn;
  std::uint32_t agas_generation = 1;
  std::chrono::milliseconds boot_timeout{30000};

  std::uint32_t locality_count() const noexcept {
    return localities.empty() ? 1 : static_cast<std::uint32_t>(localities.size());
  }

  /// Throws invalid_argument (or boot_failure for id clashes) with a
  /// diagnostic naming the offending entry.
  void validate() const;
};

/// Applies one `key = value` setting. Known keys: locality.N, this_locality,
/// scheduler.policy, scheduler.workers, scheduler.tree_arity, log_level,
/// agas.generation, boot.timeout_ms.
void apply_setting(runtime_config& cfg, std::string_view key, std::string_view value);

/// Parses `key = value` lines; `#` starts a comment. Errors carry the line.
runtime_config parse_config(std::string_view text);

runtime_config load_config(const std::filesystem::path& path);

/// Renders `cfg` in the same grammar parse_config reads.
std::string format_config(const runtime_config& cfg);

} // namespace amt

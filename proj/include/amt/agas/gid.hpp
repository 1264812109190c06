#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

namespace amt {

/// 128-bit global identity: (home locality, generation, sequence).
///
/// All-zero is the null GID. Generation 0 is reserved for runtime-owned
/// identities such as locality endpoints; minted objects use generation >= 1.
struct gid {
  std::uint32_t home = 0;
  std::uint32_t generation = 0;
  std::uint64_t sequence = 0;

  constexpr bool is_null() const noexcept { return home == 0 && generation == 0 && sequence == 0; }
  constexpr explicit operator bool() const noexcept { return !is_null(); }

  friend constexpr auto operator<=>(const gid&, const gid&) = default;

  std::string to_string() const;
};

inline constexpr gid null_gid{};

/// GID addressing the runtime of locality `l` itself (system and plain actions).
constexpr gid locality_gid(std::uint32_t l) noexcept { return gid{l, 0, 1}; }

constexpr bool is_locality_gid(const gid& g) noexcept {
  return g.generation == 0 && g.sequence == 1;
}

} // namespace amt

template <>
struct std::hash<amt::gid> {
  std::size_t operator()(const amt::gid& g) const noexcept {
    std::uint64_t h = (static_cast<std::uint64_t>(g.home) << 32) | g.generation;
    h ^= g.sequence + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

#pragma once

#include "amt/agas/gid.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace amt {

/// One-sided active message.
struct parcel {
  gid dest;
  std::uint64_t action_id = 0;
  gid continuation;  // null when no result is expected
  std::uint32_t source_locality = 0;
  std::uint64_t seq_no = 0;
  bool forwarded = false;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const parcel&, const parcel&) = default;
};

inline constexpr std::size_t frame_header_size = 64;
inline constexpr std::uint16_t frame_version = 1;
inline constexpr std::uint16_t flag_has_continuation = 0x1;
inline constexpr std::uint16_t flag_forwarded = 0x2;

/// Serializes `p` into a self-delimiting frame of 64 + payload bytes.
std::vector<std::uint8_t> encode(const parcel& p);

/// Parses exactly one complete frame. Throws decode_error naming the
/// offending field on bad magic, version, flags or length.
parcel decode(std::span<const std::uint8_t> frame);

/// Validates a 64-byte header and returns its payload length, so stream
/// readers know how many more bytes belong to the frame.
std::uint32_t frame_payload_length(std::span<const std::uint8_t> header);

/// 64-bit FNV-1a of `s`.
constexpr std::uint64_t fnv1a_64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace amt

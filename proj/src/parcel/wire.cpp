#include "amt/parcel/wire.hpp"

#include "amt/error.hpp"
#include "amt/parcel/value.hpp"

#include <string>

namespace amt {

namespace {

constexpr std::uint8_t magic[4] = {0x41, 0x4D, 0x54, 0x31};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (int s = static_cast<int>(sizeof(T) * 8) - 8; s >= 0; s -= 8) {
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> s));
  }
}

template <typename T>
T get(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v = (v << 8) | p[i];
  return static_cast<T>(v);
}

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw_error(errc::decode_error, "frame field '" + field + "': " + why);
}

// Header byte offsets.
constexpr std::size_t off_version = 4;
constexpr std::size_t off_flags = 6;
constexpr std::size_t off_dest = 8;
constexpr std::size_t off_cont = 24;
constexpr std::size_t off_action = 40;
constexpr std::size_t off_source = 48;
constexpr std::size_t off_seq = 52;
constexpr std::size_t off_len = 60;

} // namespace

std::vector<std::uint8_t> encode(const parcel& p) {
  std::vector<std::uint8_t> out;
  out.reserve(frame_header_size + p.payload.size());
  for (auto b : magic) out.push_back(b);
  put<std::uint16_t>(out, frame_version);
  std::uint16_t flags = 0;
  if (!p.continuation.is_null()) flags |= flag_has_continuation;
  if (p.forwarded) flags |= flag_forwarded;
  put<std::uint16_t>(out, flags);
  put_gid(out, p.dest);
  put_gid(out, p.continuation);
  put<std::uint64_t>(out, p.action_id);
  put<std::uint32_t>(out, p.source_locality);
  put<std::uint64_t>(out, p.seq_no);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.payload.size()));
  out.insert(out.end(), p.payload.begin(), p.payload.end());
  return out;
}

std::uint32_t frame_payload_length(std::span<const std::uint8_t> header) {
  if (header.size() < 4) bad("magic", "truncated");
  for (int i = 0; i < 4; ++i) {
    if (header[i] != magic[i]) bad("magic", "expected 41 4D 54 31");
  }
  if (header.size() < off_flags) bad("version", "truncated");
  auto version = get<std::uint16_t>(header.data() + off_version);
  if (version != frame_version) bad("version", "unsupported version " + std::to_string(version));
  if (header.size() < frame_header_size) bad("header", "truncated");
  auto flags = get<std::uint16_t>(header.data() + off_flags);
  if ((flags & ~(flag_has_continuation | flag_forwarded)) != 0) bad("flags", "unknown bits set");
  return get<std::uint32_t>(header.data() + off_len);
}

parcel decode(std::span<const std::uint8_t> frame) {
  auto len = frame_payload_length(frame);
  if (frame.size() < frame_header_size + len) bad("payload", "truncated");
  if (frame.size() > frame_header_size + len) bad("payload_len", "trailing bytes after frame");
  const auto* h = frame.data();
  parcel p;
  auto flags = get<std::uint16_t>(h + off_flags);
  p.dest = get_gid(frame.subspan(off_dest, 16));
  p.continuation = get_gid(frame.subspan(off_cont, 16));
  if (((flags & flag_has_continuation) != 0) != !p.continuation.is_null()) {
    bad("flags", "has-continuation bit disagrees with continuation GID");
  }
  p.forwarded = (flags & flag_forwarded) != 0;
  p.action_id = get<std::uint64_t>(h + off_action);
  p.source_locality = get<std::uint32_t>(h + off_source);
  p.seq_no = get<std::uint64_t>(h + off_seq);
  p.payload.assign(frame.begin() + frame_header_size, frame.end());
  return p;
}

} // namespace amt

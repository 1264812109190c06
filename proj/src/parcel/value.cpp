#include "amt/parcel/value.hpp"

#include <bit>
#include <cstring>

namespace amt {

namespace {

constexpr std::size_t max_depth = 64;

template <typename... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint64_t read_be(const std::uint8_t* p, std::size_t n) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < n; ++i) v = (v << 8) | p[i];
  return v;
}

class reader {
 public:
  explicit reader(std::span<const std::uint8_t> b) : buf_(b) {}

  std::size_t remaining() const noexcept { return buf_.size() - pos_; }

  std::uint64_t take(std::size_t n, const char* field) {
    need(n, field);
    auto v = read_be(buf_.data() + pos_, n);
    pos_ += n;
    return v;
  }

  std::span<const std::uint8_t> take_bytes(std::size_t n, const char* field) {
    need(n, field);
    auto s = buf_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* field) const {
    if (remaining() < n) {
      throw_error(errc::decode_error, std::string("value truncated in ") + field);
    }
  }

  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

value decode_one(reader& in, std::size_t depth) {
  if (depth > max_depth) throw_error(errc::decode_error, "value nesting too deep");
  auto tag = static_cast<std::uint8_t>(in.take(1, "tag"));
  auto len = static_cast<std::uint32_t>(in.take(4, "length"));
  auto body = in.take_bytes(len, "body");
  reader b(body);
  switch (static_cast<value_tag>(tag)) {
    case value_tag::int64:
      if (len != 8) throw_error(errc::decode_error, "int64 length must be 8");
      return value(static_cast<std::int64_t>(b.take(8, "int64")));
    case value_tag::float64:
      if (len != 8) throw_error(errc::decode_error, "float64 length must be 8");
      return value(std::bit_cast<double>(b.take(8, "float64")));
    case value_tag::bytes:
      return value(std::string(body.begin(), body.end()));
    case value_tag::unit:
      if (len != 0) throw_error(errc::decode_error, "unit length must be 0");
      return value();
    case value_tag::list: {
      auto count = static_cast<std::uint32_t>(b.take(4, "list count"));
      value_list items;
      // Each element needs at least 5 bytes; reject absurd counts up front.
      if (count > b.remaining() / 5) throw_error(errc::decode_error, "list count exceeds body");
      items.reserve(count);
      for (std::uint32_t i = 0; i < count; ++i) items.push_back(decode_one(b, depth + 1));
      if (b.remaining() != 0) throw_error(errc::decode_error, "trailing bytes in list body");
      return value(std::move(items));
    }
    default:
      throw_error(errc::decode_error, "unknown value tag " + std::to_string(tag));
  }
}

} // namespace

std::string_view to_string(value_tag t) noexcept {
  switch (t) {
    case value_tag::int64: return "int64";
    case value_tag::float64: return "float64";
    case value_tag::bytes: return "bytes";
    case value_tag::list: return "list";
    case value_tag::unit: return "unit";
    case value_tag::any: return "any";
  }
  return "?";
}

value_tag value::tag() const noexcept {
  return std::visit(overloaded{
                        [](std::int64_t) { return value_tag::int64; },
                        [](double) { return value_tag::float64; },
                        [](const std::string&) { return value_tag::bytes; },
                        [](const list_type&) { return value_tag::list; },
                        [](std::monostate) { return value_tag::unit; },
                    },
                    data_);
}

namespace {
[[noreturn]] void wrong_type(value_tag want, value_tag got) {
  throw_error(errc::signature_mismatch, "expected " + std::string(to_string(want)) + ", got " +
                                            std::string(to_string(got)));
}
} // namespace

std::int64_t value::as_int64() const {
  if (auto* p = std::get_if<std::int64_t>(&data_)) return *p;
  wrong_type(value_tag::int64, tag());
}

double value::as_float64() const {
  if (auto* p = std::get_if<double>(&data_)) return *p;
  wrong_type(value_tag::float64, tag());
}

const std::string& value::as_bytes() const {
  if (auto* p = std::get_if<std::string>(&data_)) return *p;
  wrong_type(value_tag::bytes, tag());
}

const value::list_type& value::as_list() const {
  if (auto* p = std::get_if<list_type>(&data_)) return *p;
  wrong_type(value_tag::list, tag());
}

value::list_type& value::as_list() {
  if (auto* p = std::get_if<list_type>(&data_)) return *p;
  wrong_type(value_tag::list, tag());
}

bool operator==(const value& a, const value& b) noexcept {
  if (a.data_.index() != b.data_.index()) return false;
  if (auto* x = std::get_if<double>(&a.data_)) {
    return std::bit_cast<std::uint64_t>(*x) == std::bit_cast<std::uint64_t>(std::get<double>(b.data_));
  }
  return a.data_ == b.data_;
}

void encode_value(const value& v, std::vector<std::uint8_t>& out) {
  out.push_back(static_cast<std::uint8_t>(v.tag()));
  switch (v.tag()) {
    case value_tag::int64:
      put_u32(out, 8);
      put_u64(out, static_cast<std::uint64_t>(v.as_int64()));
      break;
    case value_tag::float64:
      put_u32(out, 8);
      put_u64(out, std::bit_cast<std::uint64_t>(v.as_float64()));
      break;
    case value_tag::bytes: {
      const auto& s = v.as_bytes();
      put_u32(out, static_cast<std::uint32_t>(s.size()));
      out.insert(out.end(), s.begin(), s.end());
      break;
    }
    case value_tag::unit:
      put_u32(out, 0);
      break;
    case value_tag::list: {
      auto len_at = out.size();
      put_u32(out, 0);
      const auto& items = v.as_list();
      put_u32(out, static_cast<std::uint32_t>(items.size()));
      for (const auto& item : items) encode_value(item, out);
      auto len = static_cast<std::uint32_t>(out.size() - len_at - 4);
      for (int i = 0; i < 4; ++i) out[len_at + i] = static_cast<std::uint8_t>(len >> (24 - 8 * i));
      break;
    }
    case value_tag::any:
      break;
  }
}

std::vector<std::uint8_t> encode_value(const value& v) {
  std::vector<std::uint8_t> out;
  encode_value(v, out);
  return out;
}

value decode_value(std::span<const std::uint8_t> bytes) {
  reader in(bytes);
  auto v = decode_one(in, 0);
  if (in.remaining() != 0) throw_error(errc::decode_error, "trailing bytes after value");
  return v;
}

void check_signature(std::span<const value_tag> signature, std::span<const value> args) {
  if (signature.size() != args.size()) {
    throw_error(errc::signature_mismatch, "expected " + std::to_string(signature.size()) +
                                              " arguments, got " + std::to_string(args.size()));
  }
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (signature[i] != value_tag::any && signature[i] != args[i].tag()) {
      throw_error(errc::signature_mismatch,
                  "argument " + std::to_string(i) + ": expected " +
                      std::string(to_string(signature[i])) + ", got " +
                      std::string(to_string(args[i].tag())));
    }
  }
}

std::monostate value_traits<std::monostate>::from_value(const value& v) {
  if (!v.is_unit()) wrong_type(value_tag::unit, v.tag());
  return {};
}

void put_gid(std::vector<std::uint8_t>& out, const gid& g) {
  put_u32(out, g.home);
  put_u32(out, g.generation);
  put_u64(out, g.sequence);
}

gid get_gid(std::span<const std::uint8_t> in) {
  if (in.size() < 16) throw_error(errc::decode_error, "gid truncated");
  return gid{static_cast<std::uint32_t>(read_be(in.data(), 4)),
             static_cast<std::uint32_t>(read_be(in.data() + 4, 4)), read_be(in.data() + 8, 8)};
}

value value_traits<gid>::to_value(const gid& g) {
  std::vector<std::uint8_t> b;
  put_gid(b, g);
  return value(std::string(b.begin(), b.end()));
}

gid value_traits<gid>::from_value(const value& v) {
  const auto& s = v.as_bytes();
  if (s.size() != 16) throw_error(errc::signature_mismatch, "gid argument must be 16 bytes");
  return get_gid(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

std::string gid::to_string() const {
  return "{" + std::to_string(home) + ":" + std::to_string(generation) + ":" +
         std::to_string(sequence) + "}";
}

} // namespace amt

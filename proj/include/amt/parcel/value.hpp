#pragma once

#include "amt/agas/gid.hpp"
#include "amt/error.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace amt {

/// Type tags of the tag-length-value argument encoding. `any` is only
/// meaningful in action signatures and never appears on the wire.
enum class value_tag : std::uint8_t {
  int64 = 1,
  float64 = 2,
  bytes = 3,
  list = 4,
  unit = 5,
  any = 0xFF,
};

std::string_view to_string(value_tag t) noexcept;

/// Dynamically typed action argument or result.
class value {
 public:
  using list_type = std::vector<value>;

  value() : data_(std::monostate{}) {}
  value(std::int64_t v) : data_(v) {}
  value(int v) : data_(static_cast<std::int64_t>(v)) {}
  value(std::uint32_t v) : data_(static_cast<std::int64_t>(v)) {}
  value(double v) : data_(v) {}
  value(std::string v) : data_(std::move(v)) {}
  value(const char* v) : data_(std::string(v)) {}
  value(list_type v) : data_(std::move(v)) {}

  value_tag tag() const noexcept;

  bool is_unit() const noexcept { return std::holds_alternative<std::monostate>(data_); }

  std::int64_t as_int64() const;
  double as_float64() const;
  const std::string& as_bytes() const;
  const list_type& as_list() const;
  list_type& as_list();

  /// Structural equality; floats compare by bit pattern so NaNs round-trip.
  friend bool operator==(const value& a, const value& b) noexcept;

 private:
  std::variant<std::int64_t, double, std::string, list_type, std::monostate> data_;
};

using value_list = value::list_type;

/// Appends the canonical encoding of `v` to `out`.
void encode_value(const value& v, std::vector<std::uint8_t>& out);
std::vector<std::uint8_t> encode_value(const value& v);

/// Decodes exactly one value spanning all of `bytes`; throws decode_error.
value decode_value(std::span<const std::uint8_t> bytes);

/// Throws signature_mismatch unless `args` match `signature` element-wise.
void check_signature(std::span<const value_tag> signature, std::span<const value> args);

// Conversions between C++ types and values.

template <typename T, typename = void>
struct value_traits;

template <>
struct value_traits<std::int64_t> {
  static constexpr value_tag tag = value_tag::int64;
  static value to_value(std::int64_t v) { return value(v); }
  static std::int64_t from_value(const value& v) { return v.as_int64(); }
};

template <typename T>
struct value_traits<T, std::enable_if_t<std::is_integral_v<T> && !std::is_same_v<T, bool> &&
                                        !std::is_same_v<T, std::int64_t>>> {
  static constexpr value_tag tag = value_tag::int64;
  static value to_value(T v) { return value(static_cast<std::int64_t>(v)); }
  static T from_value(const value& v) { return static_cast<T>(v.as_int64()); }
};

template <>
struct value_traits<double> {
  static constexpr value_tag tag = value_tag::float64;
  static value to_value(double v) { return value(v); }
  static double from_value(const value& v) { return v.as_float64(); }
};

template <>
struct value_traits<std::string> {
  static constexpr value_tag tag = value_tag::bytes;
  static value to_value(std::string v) { return value(std::move(v)); }
  static std::string from_value(const value& v) { return v.as_bytes(); }
};

template <>
struct value_traits<std::monostate> {
  static constexpr value_tag tag = value_tag::unit;
  static value to_value(std::monostate) { return value(); }
  static std::monostate from_value(const value& v);
};

template <>
struct value_traits<value> {
  static constexpr value_tag tag = value_tag::any;
  static value to_value(value v) { return v; }
  static value from_value(const value& v) { return v; }
};

template <>
struct value_traits<gid> {
  static constexpr value_tag tag = value_tag::bytes;
  static value to_value(const gid& g);
  static gid from_value(const value& v);
};

template <typename T>
struct value_traits<std::vector<T>> {
  static constexpr value_tag tag = value_tag::list;
  static value to_value(const std::vector<T>& xs) {
    value_list out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(value_traits<T>::to_value(x));
    return value(std::move(out));
  }
  static std::vector<T> from_value(const value& v) {
    std::vector<T> out;
    const auto& xs = v.as_list();
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(value_traits<T>::from_value(x));
    return out;
  }
};

template <typename T>
using value_arg_t = std::remove_cvref_t<T>;

template <typename T>
value to_value(T&& v) {
  return value_traits<value_arg_t<T>>::to_value(std::forward<T>(v));
}

template <typename T>
T from_value(const value& v) {
  if constexpr (std::is_void_v<T>) {
    (void)value_traits<std::monostate>::from_value(v);
  } else {
    return value_traits<T>::from_value(v);
  }
}

// GID <-> 16 big-endian bytes, same layout as in wire frames.
void put_gid(std::vector<std::uint8_t>& out, const gid& g);
gid get_gid(std::span<const std::uint8_t> in);

} // namespace amt

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace amt {

/// Error categories surfaced on futures and thrown by runtime calls.
///
/// The numeric values travel on the wire inside error-result parcels, so
/// existing entries must keep their values.
enum class errc : std::int64_t {
  runtime_shutdown = 1,
  invalid_argument = 2,
  not_found = 3,
  already_exists = 4,
  busy = 5,
  wrong_locality = 6,
  unknown_action = 7,
  signature_mismatch = 8,
  transport_error = 9,
  unsupported = 10,
  decode_error = 11,
  promise_already_satisfied = 12,
  channel_closed = 13,
  action_failed = 14,
  wrong_component = 15,
  boot_failure = 16,
};

std::string_view to_string(errc code) noexcept;

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void throw_error(errc code, const std::string& what) {
  throw error(code, what);
}

/// Returns the errc carried by `ep` if it holds an amt::error.
bool error_code_of(const std::exception_ptr& ep, errc& out) noexcept;

} // namespace amt

#include "amt/error.hpp"

#include <exception>

namespace amt {

std::string_view to_string(errc code) noexcept {
  switch (code) {
    case errc::runtime_shutdown: return "runtime-shutdown";
    case errc::invalid_argument: return "invalid-argument";
    case errc::not_found: return "not-found";
    case errc::already_exists: return "already-exists";
    case errc::busy: return "busy";
    case errc::wrong_locality: return "wrong-locality";
    case errc::unknown_action: return "unknown-action";
    case errc::signature_mismatch: return "signature-mismatch";
    case errc::transport_error: return "transport-error";
    case errc::unsupported: return "unsupported";
    case errc::decode_error: return "decode-error";
    case errc::promise_already_satisfied: return "promise-already-satisfied";
    case errc::channel_closed: return "channel-closed";
    case errc::action_failed: return "action-failed";
    case errc::wrong_component: return "wrong-component";
    case errc::boot_failure: return "boot-failure";
  }
  return "unknown";
}

bool error_code_of(const std::exception_ptr& ep, errc& out) noexcept {
  if (!ep) return false;
  try {
    std::rethrow_exception(ep);
  } catch (const error& e) {
    out = e.code();
    return true;
  } catch (...) {
  }
  return false;
}

} // namespace amt

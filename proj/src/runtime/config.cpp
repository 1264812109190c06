#include "amt/runtime/config.hpp"

#include "amt/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace amt {

namespace {

std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_uint(std::string_view key, std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw_error(errc::invalid_argument,
                "setting '" + std::string(key) + "': expected an unsigned integer, got '" +
                    std::string(v) + "'");
  }
  return out;
}

locality_endpoint parse_endpoint(std::uint32_t id, std::string_view key, std::string_view v) {
  auto colon = v.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw_error(errc::invalid_argument,
                "setting '" + std::string(key) + "': expected host:port, got '" + std::string(v) + "'");
  }
  locality_endpoint ep;
  ep.id = id;
  ep.host = std::string(v.substr(0, colon));
  ep.port = parse_uint<std::uint16_t>(key, v.substr(colon + 1));
  return ep;
}

} // namespace

log_level parse_log_level(std::string_view s) {
  if (s == "trace") return log_level::trace;
  if (s == "debug") return log_level::debug;
  if (s == "info") return log_level::info;
  if (s == "warn" || s == "warning") return log_level::warn;
  if (s == "error") return log_level::error;
  if (s == "off") return log_level::off;
  throw_error(errc::invalid_argument, "unknown log level '" + std::string(s) + "'");
}

std::string_view to_string(log_level l) noexcept {
  switch (l) {
    case log_level::trace: return "trace";
    case log_level::debug: return "debug";
    case log_level::info: return "info";
    case log_level::warn: return "warn";
    case log_level::error: return "error";
    case log_level::off: return "off";
  }
  return "?";
}

void runtime_config::validate() const {
  scheduler.validate();
  if (agas_generation == 0) {
    throw_error(errc::invalid_argument, "agas.generation must be >= 1 (0 is reserved)");
  }
  if (localities.empty()) {
    if (this_locality != 0) {
      throw_error(errc::invalid_argument, "this_locality must be 0 without a locality table");
    }
    return;
  }
  std::set<std::uint32_t> ids;
  for (const auto& ep : localities) {
    if (!ids.insert(ep.id).second) {
      throw_error(errc::boot_failure, "duplicate locality id " + std::to_string(ep.id));
    }
  }
  for (std::uint32_t i = 0; i < localities.size(); ++i) {
    if (!ids.count(i)) {
      throw_error(errc::invalid_argument,
                  "locality ids must be dense 0..N-1; missing " + std::to_string(i));
    }
  }
  if (this_locality >= localities.size()) {
    throw_error(errc::invalid_argument, "this_locality " + std::to_string(this_locality) +
                                            " is not in the locality table");
  }
}

void apply_setting(runtime_config& cfg, std::string_view key, std::string_view v) {
  if (key.starts_with("locality.")) {
    auto id = parse_uint<std::uint32_t>(key, key.substr(9));
    auto ep = parse_endpoint(id, key, v);
    // Duplicates are kept so validate() can report the clash.
    cfg.localities.push_back(ep);
    std::stable_sort(cfg.localities.begin(), cfg.localities.end(),
                     [](const auto& a, const auto& b) { return a.id < b.id; });
  } else if (key == "this_locality") {
    cfg.this_locality = parse_uint<std::uint32_t>(key, v);
  } else if (key == "scheduler.policy") {
    auto policy = parse_policy(v);
    if (!policy) {
      throw_error(errc::invalid_argument,
                  "scheduler.policy: unknown policy '" + std::string(v) +
                      "' (expected static, local_priority or hierarchical)");
    }
    cfg.scheduler.policy = *policy;
  } else if (key == "scheduler.workers") {
    cfg.scheduler.workers = parse_uint<std::size_t>(key, v);
  } else if (key == "scheduler.tree_arity") {
    cfg.scheduler.tree_arity = parse_uint<std::size_t>(key, v);
  } else if (key == "log_level") {
    cfg.log = parse_log_level(v);
  } else if (key == "agas.generation") {
    cfg.agas_generation = parse_uint<std::uint32_t>(key, v);
  } else if (key == "boot.timeout_ms") {
    cfg.boot_timeout = std::chrono::milliseconds(parse_uint<std::uint32_t>(key, v));
  } else {
    throw_error(errc::invalid_argument, "unknown setting '" + std::string(key) + "'");
  }
}

runtime_config parse_config(std::string_view text) {
  runtime_config cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw_error(errc::invalid_argument,
                  "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    auto key = trim(line.substr(0, eq));
    auto val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty()) {
      throw_error(errc::invalid_argument,
                  "line " + std::to_string(line_no) + ": empty key or value");
    }
    try {
      apply_setting(cfg, key, val);
    } catch (const error& e) {
      throw error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

runtime_config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_error(errc::not_found, "cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const error& e) {
    throw error(e.code(), path.string() + ": " + e.what());
  }
}

std::string format_config(const runtime_config& cfg) {
  std::ostringstream out;
  for (const auto& ep : cfg.localities) {
    out << "locality." << ep.id << " = " << ep.host << ':' << ep.port << '\n';
  }
  out << "this_locality = " << cfg.this_locality << '\n';
  out << "scheduler.policy = " << to_string(cfg.scheduler.policy) << '\n';
  out << "scheduler.workers = " << cfg.scheduler.workers << '\n';
  out << "scheduler.tree_arity = " << cfg.scheduler.tree_arity << '\n';
  out << "log_level = " << to_string(cfg.log) << '\n';
  out << "agas.generation = " << cfg.agas_generation << '\n';
  out << "boot.timeout_ms = " << cfg.boot_timeout.count() << '\n';
  return out.str();
}

} // namespace amt

#pragma once

#include "amt/runtime/config.hpp"

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace amt::tools {

/// Ports that were free a moment ago (bound to 0, then released).
std::vector<std::uint16_t> free_ports(std::size_t n);

/// A loopback locality table for `n` localities on fresh ports.
runtime_config loopback_config(std::uint32_t n, const scheduler_config& sched, log_level log);

/// Writes `cfg` to a private temporary file; removed on destruction.
class temp_config {
 public:
  explicit temp_config(const runtime_config& cfg);
  ~temp_config();
  temp_config(const temp_config&) = delete;
  temp_config& operator=(const temp_config&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

/// A child process running `exe args...`.
class child_process {
 public:
  /// With `quiet`, the child's stdout goes to /dev/null.
  child_process(const std::string& exe, const std::vector<std::string>& args, bool quiet = false);
  ~child_process();
  child_process(const child_process&) = delete;
  child_process& operator=(const child_process&) = delete;

  pid_t pid() const noexcept { return pid_; }
  void kill_now();
  /// Waits up to `timeout`; returns the exit status if the child exited.
  std::optional<int> wait_for(std::chrono::milliseconds timeout);

 private:
  pid_t pid_ = -1;
  bool reaped_ = false;
  int status_ = 0;
};

/// Runs localities 1..N-1 of `cfg` as `exe run` children; the caller
/// is locality 0. Children's stdout is discarded so the caller's output
/// stays clean; children still alive at destruction are killed.
class child_localities {
 public:
  child_localities(const std::string& exe, const runtime_config& cfg);
  ~child_localities();

  /// Waits for every child to exit on its own; true if all exited 0.
  bool wait_all(std::chrono::milliseconds timeout);

 private:
  temp_config file_;
  std::vector<std::unique_ptr<child_process>> children_;
};

/// Path of the running executable.
std::string self_exe();

} // namespace amt::tools

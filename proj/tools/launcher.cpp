#include "launcher.hpp"

#include "amt/error.hpp"

#include <fcntl.h>
#include <netinet/in.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <thread>

extern char** environ;

namespace amt::tools {

std::vector<std::uint16_t> free_ports(std::size_t n) {
  // Hold all sockets open until every port is known, so the n are distinct.
  std::vector<int> fds;
  std::vector<std::uint16_t> ports;
  for (std::size_t i = 0; i < n; ++i) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_error(errc::boot_failure, "socket() failed while picking ports");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    socklen_t len = sizeof addr;
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
      ::close(fd);
      throw_error(errc::boot_failure, "could not reserve a loopback port");
    }
    fds.push_back(fd);
    ports.push_back(ntohs(addr.sin_port));
  }
  for (int fd : fds) ::close(fd);
  return ports;
}

runtime_config loopback_config(std::uint32_t n, const scheduler_config& sched, log_level log) {
  runtime_config cfg;
  auto ports = free_ports(n);
  for (std::uint32_t i = 0; i < n; ++i) cfg.localities.push_back({i, "127.0.0.1", ports[i]});
  cfg.scheduler = sched;
  cfg.log = log;
  return cfg;
}

temp_config::temp_config(const runtime_config& cfg) {
  std::string templ = (std::filesystem::temp_directory_path() / "amt-config-XXXXXX").string();
  int fd = ::mkstemp(templ.data());
  if (fd < 0) throw_error(errc::boot_failure, "cannot create a temporary config file");
  ::close(fd);
  path_ = templ;
  std::ofstream out(path_);
  out << format_config(cfg);
}

temp_config::~temp_config() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

child_process::child_process(const std::string& exe, const std::vector<std::string>& args,
                             bool quiet) {
  std::vector<std::string> argv_store;
  argv_store.push_back(exe);
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  argv.push_back(nullptr);
  posix_spawn_file_actions_t actions;
  ::posix_spawn_file_actions_init(&actions);
  if (quiet) ::posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
  int rc = ::posix_spawn(&pid_, exe.c_str(), &actions, nullptr, argv.data(), environ);
  ::posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw_error(errc::boot_failure, "cannot start '" + exe + "'");
}

child_process::~child_process() {
  if (!reaped_) {
    if (!wait_for(std::chrono::milliseconds(0))) {
      kill_now();
    }
  }
}

void child_process::kill_now() {
  if (reaped_) return;
  ::kill(pid_, SIGKILL);
  ::waitpid(pid_, &status_, 0);
  reaped_ = true;
}

std::optional<int> child_process::wait_for(std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!reaped_) {
    pid_t r = ::waitpid(pid_, &status_, WNOHANG);
    if (r == pid_) {
      reaped_ = true;
      break;
    }
    if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  if (WIFEXITED(status_)) return WEXITSTATUS(status_);
  return 128 + WTERMSIG(status_);
}

child_localities::child_localities(const std::string& exe, const runtime_config& cfg)
    : file_(cfg) {
  for (std::uint32_t k = 1; k < cfg.locality_count(); ++k) {
    children_.push_back(std::make_unique<child_process>(
        exe, std::vector<std::string>{"run", "--config", file_.path().string(), "--locality",
                                      std::to_string(k)},
        /*quiet=*/true));
  }
}

child_localities::~child_localities() { wait_all(std::chrono::milliseconds(5000)); }

bool child_localities::wait_all(std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  bool ok = true;
  for (auto& c : children_) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    auto status = c->wait_for(std::max(left, std::chrono::milliseconds(0)));
    if (!status) {
      c->kill_now();
      ok = false;
    } else if (*status != 0) {
      ok = false;
    }
  }
  return ok;
}

std::string self_exe() {
  return std::filesystem::read_symlink("/proc/self/exe").string();
}

} // namespace amt::tools

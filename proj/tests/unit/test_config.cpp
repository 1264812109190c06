#include "amt/runtime/config.hpp"

#include "amt/error.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>

using namespace amt;

namespace {

errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const error& e) {
    return e.code();
  }
  return errc{};
}

} // namespace

TEST_CASE("config: parses key = value lines with comments") {
  auto cfg = parse_config(R"(# two localities on loopback
locality.0 = 127.0.0.1:7000
locality.1 = 127.0.0.1:7001   # trailing comment
this_locality = 1
scheduler.policy = hierarchical
scheduler.workers = 3
scheduler.tree_arity = 4
log_level = error
)");
  REQUIRE(cfg.localities.size() == 2);
  CHECK(cfg.localities[1].port == 7001);
  CHECK(cfg.localities[0].host == "127.0.0.1");
  CHECK(cfg.this_locality == 1);
  CHECK(cfg.scheduler.policy == policy_kind::hierarchical);
  CHECK(cfg.scheduler.workers == 3);
  CHECK(cfg.scheduler.tree_arity == 4);
  CHECK(cfg.log == log_level::error);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config: format_config round-trips") {
  runtime_config cfg;
  cfg.localities = {{0, "127.0.0.1", 9000}, {1, "localhost", 9001}, {2, "127.0.0.1", 9002}};
  cfg.this_locality = 2;
  cfg.scheduler = {policy_kind::static_queues, 5, 3};
  cfg.log = log_level::debug;
  cfg.agas_generation = 7;
  cfg.boot_timeout = std::chrono::milliseconds(1234);
  auto back = parse_config(format_config(cfg));
  REQUIRE(back.localities.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.localities[i].id == cfg.localities[i].id);
    CHECK(back.localities[i].host == cfg.localities[i].host);
    CHECK(back.localities[i].port == cfg.localities[i].port);
  }
  CHECK(back.this_locality == 2);
  CHECK(back.scheduler.policy == policy_kind::static_queues);
  CHECK(back.scheduler.workers == 5);
  CHECK(back.scheduler.tree_arity == 3);
  CHECK(back.log == log_level::debug);
  CHECK(back.agas_generation == 7);
  CHECK(back.boot_timeout == std::chrono::milliseconds(1234));
}

TEST_CASE("config: errors name the line") {
  try {
    parse_config("log_level = warn\nscheduler.workers = many\n");
    FAIL("expected an error");
  } catch (const error& e) {
    CHECK(e.code() == errc::invalid_argument);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(code_of([] { parse_config("no equals sign here"); }) == errc::invalid_argument);
  CHECK(code_of([] { parse_config("bogus.key = 1"); }) == errc::invalid_argument);
  CHECK(code_of([] { parse_config("scheduler.policy = fifo"); }) == errc::invalid_argument);
}

TEST_CASE("config: validation rejects bad locality tables") {
  runtime_config dup;
  dup.localities = {{0, "127.0.0.1", 1}, {0, "127.0.0.1", 2}};
  CHECK(code_of([&] { dup.validate(); }) == errc::boot_failure);

  runtime_config gap;
  gap.localities = {{0, "127.0.0.1", 1}, {2, "127.0.0.1", 2}};
  CHECK(code_of([&] { gap.validate(); }) != errc{});

  runtime_config self;
  self.localities = {{0, "127.0.0.1", 1}};
  self.this_locality = 3;
  CHECK(code_of([&] { self.validate(); }) != errc{});

  runtime_config single;
  CHECK_NOTHROW(single.validate());
  CHECK(single.locality_count() == 1);
}

TEST_CASE("config: load_config reads files and reports missing ones") {
  auto path = std::filesystem::temp_directory_path() / "amt_test_config.txt";
  {
    std::ofstream out(path);
    out << "scheduler.workers = 2\n";
  }
  CHECK(load_config(path).scheduler.workers == 2);
  std::filesystem::remove(path);
  CHECK(code_of([&] { load_config(path); }) == errc::not_found);
}

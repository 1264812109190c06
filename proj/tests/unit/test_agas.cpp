#include "amt/runtime/cluster.hpp"
#include "amt/runtime/components.hpp"

#include <doctest.h>

#include <mutex>
#include <set>
#include <thread>

using namespace amt;

namespace {

template <typename T>
errc failure_of(future<T> f) {
  try {
    f.get();
  } catch (const error& e) {
    return e.code();
  }
  return errc{};
}

gid new_counter(runtime& rt, std::int64_t initial = 0) {
  return rt.agas().register_object(std::make_shared<counter_object>(initial));
}

} // namespace

TEST_CASE("agas: minted GIDs are unique and homed at the creator") {
  local_cluster c(2);
  std::set<gid> seen;
  for (int i = 0; i < 100; ++i) {
    auto g = new_counter(c[i % 2]);
    CHECK(g.home == static_cast<std::uint32_t>(i % 2));
    CHECK(g.generation == 1);
    CHECK(!is_locality_gid(g));
    CHECK(seen.insert(g).second);
  }
}

TEST_CASE("agas: resolve, names and unregister") {
  local_cluster c(2);
  auto g = new_counter(c[1], 3);
  auto here = c[1].agas().resolve(g).get();
  CHECK(here.locality == 1);
  CHECK(here.object != nullptr);
  auto there = c[0].agas().resolve(g).get();
  CHECK(there.locality == 1);
  CHECK(there.object == nullptr);
  CHECK(c[0].agas().cached_locality(g) == 1u);

  c[0].agas().register_name("/test/obj", g).get();
  auto names = c[1].agas().list_names("/test/").get();
  CHECK(names == std::vector<std::string>{"/test/obj"});
  c[1].agas().unregister_name("/test/obj").get();
  CHECK(failure_of(c[0].agas().resolve_name("/test/obj")) == errc::not_found);
  CHECK(failure_of(c[0].agas().unregister_name("/test/obj")) == errc::not_found);

  CHECK(failure_of(c[0].agas().unregister(g)) == errc::wrong_locality);
  c[1].agas().unregister(g).get();
  c[0].agas().clear_cache();
  CHECK(failure_of(c[0].agas().resolve(g)) == errc::not_found);
  CHECK(failure_of(c[0].apply(g, "counter/get")) == errc::not_found);
}

TEST_CASE("agas: names are validated") {
  CHECK_NOTHROW(agas_service::check_name("/a/b#1/c"));
  CHECK_THROWS_AS(agas_service::check_name(""), error);
  CHECK_THROWS_AS(agas_service::check_name("relative"), error);
  CHECK_THROWS_AS(agas_service::check_name("/tab\there"), error);
  CHECK_THROWS_AS(agas_service::check_name("/" + std::string(255, 'x')), error);
}

TEST_CASE("agas: migration moves state and keeps the GID") {
  local_cluster c(3);
  auto g = new_counter(c[0], 41);
  c[2].apply<std::int64_t>(g, "counter/add", 1).get();  // c[2] caches locality 0

  c[0].agas().migrate(g, 1).get();
  CHECK(c[0].agas().local_object(g) == nullptr);
  CHECK(c[1].agas().local_object(g) != nullptr);
  CHECK(c[0].agas().migrations() == 1);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(c[i].agas().resolve(g).get().locality == 1);
  }
  // A stale cache is repaired after one forwarded hop.
  auto before = c[0].parcels().forwarded();
  CHECK(c[2].apply<std::int64_t>(g, "counter/add", 1).get() == 43);
  CHECK(c[0].parcels().forwarded() - before <= 1);
  CHECK(c[2].agas().cached_locality(g) == 1u);
  auto after = c[0].parcels().forwarded();
  CHECK(c[2].apply<std::int64_t>(g, "counter/get").get() == 43);
  CHECK(c[0].parcels().forwarded() == after);
}

TEST_CASE("agas: migrate requests chase the object from any locality") {
  local_cluster c(3);
  auto g = new_counter(c[1], 7);
  c[2].agas().migrate(g, 0).get();  // requested by a third party
  CHECK(c[0].agas().local_object(g) != nullptr);
  c[0].agas().migrate(g, 2).get();
  c[1].agas().migrate(g, 1).get();  // home asks to take it back
  CHECK(c[1].agas().local_object(g) != nullptr);
  CHECK(c[0].apply<std::int64_t>(g, "counter/get").get() == 7);
  c[1].agas().migrate(g, 1).get();  // already there: no-op
  CHECK(failure_of(c[0].agas().migrate(g, 9)) == errc::invalid_argument);
}

TEST_CASE("agas: objects without a snapshot refuse to migrate") {
  local_cluster c(2);
  auto ch = c[0].agas().register_object(std::make_shared<channel_object>());
  CHECK(failure_of(c[0].agas().migrate(ch, 1)) == errc::unsupported);
  CHECK(c[0].agas().local_object(ch) != nullptr);
}

TEST_CASE("agas: applies racing migrations are neither lost nor duplicated") {
  local_cluster c(3);
  auto g = new_counter(c[0]);
  std::vector<future<value>> fs;
  std::thread issuer([&] {
    for (int i = 0; i < 600; ++i) fs.push_back(c[i % 3].apply(g, "counter/add", 1));
  });
  for (std::uint32_t m = 0; m < 6; ++m) c[m % 3].agas().migrate(g, (m + 1) % 3).get();
  issuer.join();
  for (auto& f : fs) f.get();
  CHECK(c[1].apply<std::int64_t>(g, "counter/get").get() == 600);
  CHECK(c[0].agas().migrations() + c[1].agas().migrations() + c[2].agas().migrations() == 6);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(c[i].agas().resolve(g).get().locality == 0);
  }
}

TEST_CASE("agas: a second migration of a moving object is refused with busy") {
  local_cluster c(2);
  static std::once_flag once;
  std::call_once(once, [] {
    register_component_action<counter_object>("test/slow_get", [](counter_object& o) {
      std::this_thread::sleep_for(std::chrono::milliseconds(200));
      return o.get();
    });
  });
  auto g = new_counter(c[0]);
  auto slow = c[0].apply(g, "test/slow_get");  // keeps the object busy
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  auto first = c[0].agas().migrate(g, 1);
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  CHECK(failure_of(c[0].agas().migrate(g, 1)) == errc::busy);
  first.get();
  slow.get();
  CHECK(c[1].agas().local_object(g) != nullptr);
}

#include <doctest.h>

#include "amt/scheduler/scheduler.hpp"
#include "amt/tasking/async.hpp"
#include "amt/tasking/channel.hpp"
#include "amt/tasking/parallel_for.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <vector>

using namespace amt;
using namespace std::chrono_literals;

namespace {

struct boom : std::runtime_error {
  explicit boom(const char* w) : std::runtime_error(w) {}
};

std::string error_text(const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

struct runtime_fixture {
  scheduler sched{scheduler_config{policy_kind::local_priority, 4, 2}};
  scoped_scheduler bind{sched};
  ~runtime_fixture() { sched.shutdown(); }
};

} // namespace

TEST_CASE_FIXTURE(runtime_fixture, "spawn yields the work's value or error") {
  CHECK(spawn([] { return 42; }).get() == 42);
  auto failed = spawn([]() -> int { throw boom("E"); });
  CHECK_THROWS_AS(failed.get(), boom);
  CHECK(error_text(failed.exception()) == "E");
}

TEST_CASE_FIXTURE(runtime_fixture, "100000 spawns increment a counter exactly") {
  std::atomic<std::int64_t> counter{0};
  std::vector<future<void>> fs;
  fs.reserve(100000);
  for (int i = 0; i < 100000; ++i) fs.push_back(spawn([&] { counter.fetch_add(1); }));
  when_all(std::move(fs)).get();
  std::int64_t serial = 0;
  for (int i = 0; i < 100000; ++i) ++serial;
  CHECK(counter == serial);
}

TEST_CASE_FIXTURE(runtime_fixture, "make_ready_future and then") {
  CHECK(make_ready_future(7).get() == 7);
  CHECK(make_ready_future(1).then([](int x) { return x + 1; }).get() == 2);
  auto all = when_all(std::vector{make_ready_future(1), make_ready_future(2), make_ready_future(3)});
  CHECK(all.get() == std::vector<int>{1, 2, 3});

  auto chained = make_ready_future(0)
                     .then([](int x) { return x + 1; })
                     .then([](int x) { return x + 1; })
                     .then([](int x) { return x + 1; });
  CHECK(chained.get() == 3);
}

TEST_CASE_FIXTURE(runtime_fixture, "then skips the continuation on error") {
  std::atomic<bool> invoked{false};
  auto bad = make_exceptional_future<int>(std::make_exception_ptr(boom("E")));
  auto f = bad.then([&](int x) {
    invoked = true;
    return x + 1;
  });
  CHECK_THROWS_AS(f.get(), boom);
  CHECK_FALSE(invoked);

  auto thrower = make_ready_future(1).then([](int) -> int { throw boom("cont"); });
  CHECK(error_text(thrower.exception()) == "cont");
}

TEST_CASE_FIXTURE(runtime_fixture, "then chain of depth 1000") {
  auto f = make_ready_future(0);
  for (int i = 0; i < 1000; ++i) f = f.then([](int x) { return x + 1; });
  CHECK(f.get() == 1000);
}

TEST_CASE_FIXTURE(runtime_fixture, "when_all ordering and first-error rule") {
  CHECK(when_all(std::vector<future<int>>{}).get().empty());
  CHECK(when_all(std::vector{make_ready_future(1), make_ready_future(2)}).get() ==
        std::vector<int>{1, 2});

  // F completes first in time, but E is first in input order.
  promise<int> pe;
  auto agg = when_all(std::vector{make_ready_future(1), pe.get_future(),
                                  make_exceptional_future<int>(std::make_exception_ptr(boom("F")))});
  pe.set_exception(std::make_exception_ptr(boom("E")));
  CHECK(error_text(agg.exception()) == "E");

  auto tup = when_all(make_ready_future(1), make_ready_future(std::string("x")));
  CHECK(std::get<0>(tup.get()) == 1);
  CHECK(std::get<1>(tup.get()) == "x");
}

TEST_CASE_FIXTURE(runtime_fixture, "dataflow") {
  CHECK(dataflow([](int a, int b) { return a + b; }, make_ready_future(2), make_ready_future(3))
            .get() == 5);
  CHECK(dataflow([] { return 9; }).get() == 9);

  std::atomic<bool> invoked{false};
  auto bad = dataflow(
      [&](int a, int b) {
        invoked = true;
        return a + b;
      },
      make_ready_future(1), make_exceptional_future<int>(std::make_exception_ptr(boom("E"))));
  CHECK(error_text(bad.exception()) == "E");
  CHECK_FALSE(invoked);

  auto sum = dataflow(
      [](const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); },
      std::vector{make_ready_future(1), make_ready_future(2), make_ready_future(4)});
  CHECK(sum.get() == 7);
}

TEST_CASE_FIXTURE(runtime_fixture, "diamond DAG runs in topological order") {
  for (int rep = 0; rep < 50; ++rep) {
    std::mutex m;
    std::vector<char> log;
    auto note = [&](char c) {
      std::lock_guard lock(m);
      log.push_back(c);
    };
    auto a = spawn([&] {
      note('A');
      return 1;
    });
    auto b = dataflow([&](int x) { note('B'); return x; }, a);
    auto c = dataflow([&](int x) { note('C'); return x; }, a);
    auto d = dataflow([&](int x, int y) { note('D'); return x + y; }, b, c);
    CHECK(d.get() == 2);
    REQUIRE(log.size() == 4);
    CHECK(log.front() == 'A');
    CHECK(log.back() == 'D');
  }
}

TEST_CASE_FIXTURE(runtime_fixture, "then and dataflow agree for pure bodies") {
  for (int v : {-3, 0, 17}) {
    auto body = [](int x) { return x * x - 1; };
    CHECK(make_ready_future(v).then(body).get() == dataflow(body, make_ready_future(v)).get());
  }
}

TEST_CASE("future_get outside the runtime parks until fulfilled") {
  promise<int> p;
  std::thread producer([p]() mutable {
    std::this_thread::sleep_for(50ms);
    p.set_value(5);
  });
  auto start = std::chrono::steady_clock::now();
  CHECK(p.get_future().get() == 5);
  CHECK(std::chrono::steady_clock::now() - start >= 40ms);
  producer.join();
}

TEST_CASE("single assignment is enforced") {
  promise<int> p;
  p.set_value(1);
  CHECK_FALSE(p.try_set_value(2));
  CHECK_THROWS_AS(p.set_value(3), error);
  CHECK_THROWS_AS(p.set_exception(std::make_exception_ptr(boom("x"))), error);
  CHECK(p.get_future().get() == 1);
}

TEST_CASE("continuations attached before and after completion each run once") {
  scheduler s({policy_kind::local_priority, 2, 2});
  scoped_scheduler bind(s);
  promise<int> p;
  auto f = p.get_future();
  std::atomic<int> runs{0};
  std::vector<future<int>> outs;
  for (int i = 0; i < 10; ++i) outs.push_back(f.then([&](int x) { ++runs; return x; }));
  p.set_value(3);
  for (int i = 0; i < 10; ++i) outs.push_back(f.then([&](int x) { ++runs; return x; }));
  for (auto& o : outs) CHECK(o.get() == 3);
  CHECK(runs == 20);
  s.shutdown();
}

TEST_CASE("single-worker rendezvous through future_get") {
  scheduler s({policy_kind::local_priority, 1, 2});
  promise<int> p;
  auto fut = p.get_future();
  auto a = s.spawn([fut] { return fut.get() * 2; });
  auto b = s.spawn([p]() mutable { p.set_value(21); });
  CHECK(a.get() == 42);
  b.get();
  s.shutdown();
}

TEST_CASE_FIXTURE(runtime_fixture, "channel FIFO and pending receive") {
  channel<int> c;
  c.send(1);
  c.send(2);
  c.send(3);
  CHECK(c.recv().get() == 1);
  CHECK(c.recv().get() == 2);
  CHECK(c.recv().get() == 3);

  auto pending = c.recv();
  CHECK_FALSE(pending.is_ready());
  c.send(9);
  CHECK(pending.get() == 9);

  auto orphan = c.recv();
  c.close();
  errc code{};
  CHECK(error_code_of(orphan.exception(), code));
  CHECK(code == errc::channel_closed);
  CHECK_THROWS_AS(c.send(4), error);
  CHECK(error_code_of(c.recv().exception(), code));
}

TEST_CASE_FIXTURE(runtime_fixture, "channel conservation under concurrency") {
  channel<int> c;
  constexpr int n = 2000;
  std::vector<future<int>> got;
  for (int i = 0; i < n / 2; ++i) got.push_back(c.recv());
  auto sender = spawn([c] {
    for (int i = 0; i < n; ++i) c.send(i);
  });
  sender.get();
  for (int i = n / 2; i < n; ++i) got.push_back(c.recv());
  for (int i = 0; i < n; ++i) CHECK(got[static_cast<std::size_t>(i)].get() == i);
}

TEST_CASE_FIXTURE(runtime_fixture, "parallel_for") {
  std::atomic<int> calls{0};
  parallel_for(5, 5, [&](std::int64_t) { ++calls; }).get();
  CHECK(calls == 0);

  CHECK(parallel_for_chunk(0, 100, 4) == 7);
  CHECK(parallel_for_chunk(0, 16, 4) == 1);
  CHECK(parallel_for_chunk(0, 17, 4) == 2);

  constexpr std::int64_t n = 1000000;
  auto chunk = parallel_for_chunk(1, n + 1, sched.worker_count());
  std::vector<std::int64_t> partials(static_cast<std::size_t>((n + chunk - 1) / chunk), 0);
  parallel_for(1, n + 1, [&](std::int64_t i) {
    partials[static_cast<std::size_t>((i - 1) / chunk)] += i;
  }).get();
  CHECK(std::accumulate(partials.begin(), partials.end(), std::int64_t{0}) == 500000500000);

  constexpr std::int64_t m = 100000;
  std::vector<std::atomic<int>> seen(m);
  for (auto& s : seen) s = 0;
  parallel_for(0, m, [&](std::int64_t i) { seen[static_cast<std::size_t>(i)]++; }).get();
  std::vector<int> serial(m, 0);
  for (std::int64_t i = 0; i < m; ++i) serial[static_cast<std::size_t>(i)]++;
  bool same = true;
  for (std::int64_t i = 0; i < m; ++i) same &= seen[static_cast<std::size_t>(i)] == serial[static_cast<std::size_t>(i)];
  CHECK(same);

  auto failing = parallel_for(0, 100, [](std::int64_t i) {
    if (i == 50) throw boom("chunk");
  });
  CHECK(error_text(failing.exception()) == "chunk");
}

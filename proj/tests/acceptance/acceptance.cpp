// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance <path-to-amt-cli>
//
// Exit status is 0 only if every criterion passes.

#include "launcher.hpp"

#include "amt/apps/bench.hpp"
#include "amt/apps/stencil.hpp"
#include "amt/parcel/value.hpp"
#include "amt/parcel/wire.hpp"
#include "amt/runtime/cluster.hpp"
#include "amt/runtime/components.hpp"
#include "amt/scheduler/scheduler.hpp"
#include "amt/tasking/async.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

using namespace amt;
using namespace std::chrono_literals;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

/// Outcome of one criterion: pass/fail plus a one-line explanation.
struct verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "FAILED " + what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

// 1. Exactly-once under every policy and across a policy switch.

verdict exactly_once() {
  verdict v;
  constexpr int n = 100000;
  auto run = [&](policy_kind start, std::optional<policy_kind> switch_to) {
    scheduler s({start, 8, 2});
    std::vector<std::atomic<int>> hits(n);
    for (auto& h : hits) h = 0;
    auto t0 = clock_type::now();
    std::thread producer([&] {
      for (int i = 0; i < n; ++i) s.submit([&hits, i] { hits[i].fetch_add(1); });
    });
    if (switch_to) {
      std::this_thread::sleep_for(2ms);
      s.set_policy(*switch_to);
    }
    producer.join();
    s.shutdown(true);
    double secs = seconds_since(t0);
    int missing = 0, doubled = 0;
    for (auto& h : hits) {
      missing += h == 0;
      doubled += h > 1;
    }
    auto executed = s.stats().total_executed();
    std::string label = std::string(to_string(start)) +
                        (switch_to ? "->" + std::string(to_string(*switch_to)) : "");
    v.require(executed == n && missing == 0 && doubled == 0,
              fmt::format("{}: executed={} missing={} doubled={}", label, executed, missing,
                          doubled));
    v.require(secs < 30, fmt::format("{} took {:.1f}s", label, secs));
    v.note(fmt::format("{} {:.2f}s", label, secs));
  };
  run(policy_kind::static_queues, std::nullopt);
  run(policy_kind::local_priority, std::nullopt);
  run(policy_kind::hierarchical, std::nullopt);
  run(policy_kind::local_priority, policy_kind::hierarchical);
  return v;
}

// 2. Work stealing beats static queues on a skewed load.

verdict stealing_efficacy() {
  verdict v;
  policy_bench_params p;
  p.tasks = 10000;
  p.task_us = 100;
  p.skew = policy_skew::all_to_0;
  p.workers = 4;
  p.workload = task_workload::automatic;
  p.policies = {policy_kind::static_queues, policy_kind::local_priority};
  auto t0 = clock_type::now();
  auto r = bench_policy_compare(p);
  double secs = seconds_since(t0);
  auto num = [&](std::size_t row, const char* col) { return r.at(row, col); };
  double static_ms = std::get<double>(num(0, "makespan_ms"));
  double lp_ms = std::get<double>(num(1, "makespan_ms"));
  auto static_steals = std::get<std::int64_t>(num(0, "steals_succeeded"));
  auto lp_steals = std::get<std::int64_t>(num(1, "steals_succeeded"));
  v.require(lp_ms <= 0.5 * static_ms, "local_priority makespan > 0.5 x static");
  v.require(static_steals == 0, "static stole");
  v.require(lp_steals >= 1, "local_priority never stole");
  v.require(secs < 60, fmt::format("took {:.1f}s", secs));
  v.note(fmt::format("workload={} static={:.0f}ms local_priority={:.0f}ms ratio={:.3f} "
                     "steals static={} local_priority={}",
                     std::get<std::string>(num(0, "workload")), static_ms, lp_ms,
                     lp_ms / static_ms, static_steals, lp_steals));
  return v;
}

// 3. Hierarchical policy: root-first enqueue, every leaf fetches.

verdict hierarchical_discipline() {
  verdict v;
  constexpr std::size_t workers = 4;
  constexpr int n = 40 * workers;
  scheduler s({policy_kind::hierarchical, workers, 2});
  std::mutex m;
  std::map<std::uint64_t, std::size_t> first_queue;
  s.set_enqueue_observer([&](std::uint64_t id, std::size_t node) {
    std::lock_guard lock(m);
    first_queue.emplace(id, node);
  });
  std::atomic<int> ran{0};
  for (int i = 0; i < n; ++i) {
    s.submit(
        [&] {
          std::this_thread::sleep_for(200us);
          ++ran;
        },
        task_priority::normal, static_cast<std::size_t>(i) % workers);
  }
  s.shutdown(true);
  auto st = s.stats();
  auto at_root = std::count_if(first_queue.begin(), first_queue.end(),
                               [](const auto& kv) { return kv.second == 0; });
  v.require(first_queue.size() == n && at_root == n,
            fmt::format("{} of {} tasks first queued at the root", at_root, n));
  v.require(st.root_enqueues == n, "root enqueue counter mismatch");
  v.require(ran == n && st.total_executed() == n, fmt::format("ran {} of {}", ran.load(), n));
  std::string fetches;
  for (std::size_t w = 0; w < st.workers.size(); ++w) {
    v.require(st.workers[w].leaf_fetches > 0, fmt::format("worker {} never fetched", w));
    fetches += (w ? "," : "") + std::to_string(st.workers[w].leaf_fetches);
  }
  v.note(fmt::format("{}/{} root-first, leaf fetches [{}]", at_root, n, fetches));
  return v;
}

// 4. Dataflow over random DAGs runs in a topological order.

verdict futurization_order() {
  verdict v;
  scheduler s({policy_kind::local_priority, 4, 2});
  scoped_scheduler bind(s);
  std::mt19937 rng(2024);
  auto t0 = clock_type::now();
  int bad_graphs = 0;
  for (int g = 0; g < 1000; ++g) {
    const int nodes = 1 + static_cast<int>(rng() % 50);
    std::vector<std::vector<int>> preds(nodes);
    for (int i = 1; i < nodes; ++i) {
      int k = static_cast<int>(rng() % 4);
      for (int e = 0; e < k; ++e) preds[i].push_back(static_cast<int>(rng() % i));
    }
    std::mutex m;
    std::vector<int> log;
    auto body = [&m, &log](int id) {
      std::lock_guard lock(m);
      log.push_back(id);
      return id;
    };
    std::vector<future<int>> f;
    for (int i = 0; i < nodes; ++i) {
      if (preds[i].empty()) {
        f.push_back(spawn([body, i] { return body(i); }));
      } else {
        std::vector<future<int>> in;
        for (int p : preds[i]) in.push_back(f[p]);
        f.push_back(dataflow([body, i](const std::vector<int>&) { return body(i); }, in));
      }
    }
    for (auto& x : f) x.get();
    // Offline check: each node is logged once, after all its predecessors.
    std::vector<int> pos(nodes, -1);
    for (std::size_t k = 0; k < log.size(); ++k) pos[log[k]] = static_cast<int>(k);
    bool ok = log.size() == static_cast<std::size_t>(nodes);
    for (int i = 0; ok && i < nodes; ++i) {
      if (pos[i] < 0) ok = false;
      for (int p : preds[i]) ok = ok && pos[p] < pos[i];
    }
    bad_graphs += !ok;
  }
  double secs = seconds_since(t0);
  s.shutdown();
  v.require(bad_graphs == 0, fmt::format("{} graphs out of order", bad_graphs));
  v.require(secs < 60, fmt::format("took {:.1f}s", secs));
  v.note(fmt::format("1000 DAGs valid, {:.2f}s", secs));
  return v;
}

// 5. A single worker never deadlocks on a future_get rendezvous.

verdict deadlock_freedom() {
  verdict v;
  int completed = 0;
  for (int rep = 0; rep < 100; ++rep) {
    // The watchdog runs the rendezvous on another thread; a hang is
    // reported, not waited out.
    auto job = std::make_shared<std::packaged_task<bool()>>([] {
      scheduler s({policy_kind::local_priority, 1, 2});
      promise<int> p;
      auto fut = p.get_future();
      auto a = s.spawn([fut] { return fut.get() * 2; });
      auto b = s.spawn([p]() mutable { p.set_value(21); });
      bool ok = a.get() == 42;
      b.get();
      s.shutdown();
      return ok;
    });
    auto done = job->get_future();
    std::thread(
        [job] { (*job)(); })
        .detach();
    if (done.wait_for(10s) != std::future_status::ready) {
      v.require(false, fmt::format("repetition {} hung past the 10 s watchdog", rep));
      return v;
    }
    if (done.get()) ++completed;
  }
  v.require(completed == 100, fmt::format("{} of 100 completed correctly", completed));
  v.note(fmt::format("{}/100 rendezvous completed", completed));
  return v;
}

// 6. Wire format round-trips bit-exactly.

value random_value(std::mt19937_64& rng, int depth) {
  switch (rng() % (depth > 2 ? 4 : 5)) {
    case 0: return value(static_cast<std::int64_t>(rng()));
    case 1: return value(std::bit_cast<double>(rng()));
    case 2: {
      std::string s(rng() % 32, '\0');
      for (auto& c : s) c = static_cast<char>(rng());
      return value(std::move(s));
    }
    case 3: return value();
    default: {
      value_list xs;
      for (auto n = rng() % 5; n > 0; --n) xs.push_back(random_value(rng, depth + 1));
      return value(std::move(xs));
    }
  }
}

verdict wire_exactness() {
  verdict v;
  std::mt19937_64 rng(99);
  int failures = 0, floats = 0;
  for (int i = 0; i < 10000; ++i) {
    parcel p;
    p.dest = gid{static_cast<std::uint32_t>(rng()), static_cast<std::uint32_t>(rng()), rng()};
    if (rng() % 2) {
      p.continuation = gid{static_cast<std::uint32_t>(rng()), static_cast<std::uint32_t>(rng()),
                           rng()};
    }
    p.action_id = rng();
    p.source_locality = static_cast<std::uint32_t>(rng());
    p.seq_no = rng();
    p.forwarded = rng() % 2 == 0;
    // Every parcel carries at least one float with an arbitrary bit pattern.
    value_list args{value(std::bit_cast<double>(rng())), random_value(rng, 0)};
    ++floats;
    auto payload = encode_value(value(args));
    p.payload = payload;
    auto bytes = encode(p);
    auto back = decode(bytes);
    auto args_back = decode_value(back.payload).as_list();
    bool ok = back == p && encode(back) == bytes && encode_value(value(args_back)) == payload &&
              std::bit_cast<std::uint64_t>(args_back[0].as_float64()) ==
                  std::bit_cast<std::uint64_t>(args[0].as_float64());
    failures += !ok;
  }
  parcel minimal;
  auto frame = encode(minimal);
  bool magic = frame.size() == 64 && frame[0] == 0x41 && frame[1] == 0x4D && frame[2] == 0x54 &&
               frame[3] == 0x31;
  v.require(failures == 0, fmt::format("{} of 10000 parcels differ after round trip", failures));
  v.require(magic, fmt::format("minimal frame is {} bytes / bad magic", frame.size()));
  v.note(fmt::format("10000 parcels ({} with float payloads) identical; minimal frame {} bytes, "
                     "magic 41 4D 54 31",
                     floats, frame.size()));
  return v;
}

// 7. Migration is transparent to callers.

verdict migration_transparency() {
  verdict v;
  local_cluster c(3);
  auto g = c[0].agas().register_object(std::make_shared<counter_object>(0));
  constexpr int applies = 1000;
  constexpr int migrations = 10;
  constexpr std::size_t window = 32;  // per issuing locality
  const std::size_t in_flight_bound = window * c.size();

  std::atomic<int> failed{0};
  std::vector<std::thread> issuers;
  for (std::size_t l = 0; l < c.size(); ++l) {
    issuers.emplace_back([&, l] {
      std::deque<future<value>> pending;
      auto drain_one = [&] {
        try {
          pending.front().get();
        } catch (...) {
          ++failed;
        }
        pending.pop_front();
      };
      for (int i = static_cast<int>(l); i < applies; i += static_cast<int>(c.size())) {
        if (pending.size() == window) drain_one();
        pending.push_back(c[l].apply(g, "counter/add", 1));
      }
      while (!pending.empty()) drain_one();
    });
  }
  for (int m = 0; m < migrations; ++m) {
    auto dest = static_cast<std::uint32_t>((m + 1) % c.size());
    c[m % c.size()].agas().migrate(g, dest).get();
    std::this_thread::sleep_for(2ms);
  }
  for (auto& t : issuers) t.join();

  std::int64_t final_value = c[1].apply<std::int64_t>(g, "counter/get").get();
  std::uint32_t holder = 0;
  int holders = 0;
  for (std::uint32_t l = 0; l < c.size(); ++l) {
    if (c[l].agas().local_object(g)) {
      holder = l;
      ++holders;
    }
  }
  bool agree = holders == 1;
  for (std::size_t l = 0; l < c.size(); ++l) {
    agree = agree && c[l].agas().resolve(g).get().locality == holder;
  }
  std::int64_t forwarded = 0, done = 0;
  for (std::size_t l = 0; l < c.size(); ++l) {
    forwarded += c[l].parcels().forwarded();
    done += c[l].agas().migrations();
  }
  v.require(failed == 0, fmt::format("{} applies failed", failed.load()));
  v.require(final_value == applies, fmt::format("final value {}", final_value));
  v.require(done == migrations, fmt::format("{} migrations recorded", done));
  v.require(agree, "localities disagree on the owner");
  v.require(forwarded <= static_cast<std::int64_t>(migrations * in_flight_bound),
            fmt::format("forwarded {} > {}", forwarded, migrations * in_flight_bound));
  v.note(fmt::format("final={} owner={} agreed by all; forwarded={} (bound {} = {} x {} in flight)",
                     final_value, holder, forwarded, migrations * in_flight_bound, migrations,
                     in_flight_bound));
  return v;
}

// 8. Counters read the same from anywhere.

std::int64_t read_counter(runtime& rt, const std::string& name) {
  auto cv = rt.counters().query(name).get();
  if (cv.status != counter_status::ok) throw error(errc::not_found, "counter " + name);
  return cv.value;
}

verdict cross_locality_counters() {
  verdict v;
  local_cluster c(2);
  std::vector<future<value>> work;
  for (int i = 0; i < 200; ++i) {
    work.push_back(c[0].apply(locality_gid(1), "amt/echo", std::int64_t{i}));
    work.push_back(c[1].apply(locality_gid(0), "amt/echo", std::int64_t{i}));
  }
  for (int i = 0; i < 100; ++i) {
    c[i % 2].spawn([] {}).get();
  }
  for (auto& f : work) f.get();
  std::this_thread::sleep_for(200ms);  // quiescence

  for (std::uint32_t l = 0; l < 2; ++l) {
    auto name = fmt::format("/scheduler/locality#{}/tasks/executed/cumulative", l);
    auto local = read_counter(c[l], name);
    auto remote = read_counter(c[1 - l], name);
    v.require(local == remote, fmt::format("{}: local {} remote {}", name, local, remote));
    v.note(fmt::format("executed@{} local={} remote={}", l, local, remote));
  }
  for (std::uint32_t a = 0; a < 2; ++a) {
    std::uint32_t b = 1 - a;
    auto sent = read_counter(c[a], fmt::format("/parcel/locality#{}/peer#{}/sent/cumulative", a, b));
    auto received =
        read_counter(c[b], fmt::format("/parcel/locality#{}/peer#{}/received/cumulative", b, a));
    v.require(sent == received, fmt::format("sent({}->{})={} received={}", a, b, sent, received));
    v.note(fmt::format("sent({0}->{1})={2} received({1}<-{0})={3}", a, b, sent, received));
  }
  return v;
}

// 9. Distributed stencil equals the serial computation.

std::vector<double> heat_reference(std::vector<double> u, int steps, bool zero_flux) {
  for (int s = 0; s < steps; ++s) {
    std::vector<double> next(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      double l = i > 0 ? u[i - 1] : (zero_flux ? u[0] : 0.0);
      double r = i + 1 < u.size() ? u[i + 1] : (zero_flux ? u[i] : 0.0);
      next[i] = u[i] + 0.25 * (l - 2.0 * u[i] + r);
    }
    u = next;
  }
  return u;
}

verdict stencil_correctness() {
  verdict v;
  local_cluster c(2);
  std::vector<double> u0(64, 0.0);
  u0[32] = 1.0;
  auto got = run_stencil(c[0], u0, 100, stencil_boundary::fixed_zero);
  auto want = heat_reference(u0, 100, false);
  double err = 0;
  for (std::size_t i = 0; i < want.size(); ++i) err = std::max(err, std::abs(got[i] - want[i]));
  v.require(got.size() == 64 && err <= 1e-12, fmt::format("max abs error {:g}", err));

  std::vector<double> flat(64, 1.0);
  bool fixed_point = run_stencil(c[0], flat, 100, stencil_boundary::zero_flux) == flat;
  v.require(fixed_point, "uniform field drifted");
  v.note(fmt::format("64x100x2 max abs error {:g}; uniform field unchanged after 100 steps", err));
  return v;
}

// 10. Losing a locality fails pending futures promptly.

verdict failure_surfacing(const std::string& cli) {
  verdict v;
  auto cfg = tools::loopback_config(2, {policy_kind::local_priority, 2, 2}, log_level::error);
  tools::temp_config file(cfg);
  tools::child_process child(cli, {"run", "--config", file.path().string(), "--locality", "1"},
                             /*quiet=*/true);
  cfg.this_locality = 0;
  runtime rt(cfg);
  rt.start();

  std::vector<future<value>> pending;
  for (int i = 0; i < 8; ++i) {
    pending.push_back(rt.apply(locality_gid(1), "amt/sleep_ms", std::int64_t{30000}));
  }
  std::this_thread::sleep_for(200ms);  // mid-apply
  auto t0 = clock_type::now();
  child.kill_now();

  int transport_errors = 0, other = 0, hung = 0;
  for (auto& f : pending) {
    while (!f.is_ready() && clock_type::now() - t0 < 5s) std::this_thread::sleep_for(5ms);
    if (!f.is_ready()) {
      ++hung;
      continue;
    }
    errc code{};
    if (f.has_exception() && error_code_of(f.exception(), code) && code == errc::transport_error) {
      ++transport_errors;
    } else {
      ++other;
    }
  }
  double secs = seconds_since(t0);
  rt.shutdown();
  v.require(hung == 0, fmt::format("{} futures still pending after 5 s", hung));
  v.require(other == 0, fmt::format("{} futures completed without transport_error", other));
  v.note(fmt::format("{}/8 pending futures failed with transport_error {:.0f} ms after SIGKILL",
                     transport_errors, secs * 1000));
  return v;
}

} // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path-to-amt-cli>\n";
    return 1;
  }
  const std::string cli = argv[1];
  struct criterion {
    int id;
    const char* name;
    std::function<verdict()> run;
  };
  const std::vector<criterion> criteria{
      {1, "exactly-once", exactly_once},
      {2, "work-stealing efficacy", stealing_efficacy},
      {3, "hierarchical discipline", hierarchical_discipline},
      {4, "futurization order", futurization_order},
      {5, "deadlock freedom", deadlock_freedom},
      {6, "wire exactness", wire_exactness},
      {7, "migration transparency", migration_transparency},
      {8, "cross-locality counters", cross_locality_counters},
      {9, "stencil correctness", stencil_correctness},
      {10, "failure surfacing", [&] { return failure_surfacing(cli); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failed += !v.pass;
    std::cout << fmt::format("[{}] {:>2}. {}: {}", v.pass ? "PASS" : "FAIL", c.id, c.name,
                             v.detail)
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

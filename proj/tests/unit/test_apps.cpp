#include "amt/apps/bench.hpp"
#include "amt/apps/stencil.hpp"
#include "amt/runtime/cluster.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace amt;

namespace {

runtime_config single(std::size_t workers) {
  runtime_config cfg;
  cfg.scheduler = {policy_kind::local_priority, workers, 2};
  return cfg;
}

// Independent oracle: the textbook update written out cell by cell.
std::vector<double> heat_oracle(std::vector<double> u, int steps, bool zero_flux) {
  for (int s = 0; s < steps; ++s) {
    std::vector<double> v(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      double l = i > 0 ? u[i - 1] : (zero_flux ? u[0] : 0.0);
      double r = i + 1 < u.size() ? u[i + 1] : (zero_flux ? u[i] : 0.0);
      v[i] = u[i] + 0.25 * (l - 2.0 * u[i] + r);
    }
    u = v;
  }
  return u;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

} // namespace

TEST_CASE("fib: reference values") {
  CHECK(fib_serial(0) == 0);
  CHECK(fib_serial(1) == 1);
  CHECK(fib_serial(10) == 55);
  CHECK(fib_serial(30) == 832040);
  CHECK(fib_serial(90) == 2880067194370816120ll);
  for (int n = 0; n <= 70; ++n) CHECK(fib_closed_form(n) == fib_serial(n));
}

TEST_CASE("fib: futurized run matches and spawns tasks") {
  auto rt = runtime::boot(single(2));
  for (auto [n, want] : {std::pair{0, 0}, {1, 1}, {10, 55}}) {
    auto r = bench_fib(*rt, n, 2);
    CHECK(std::get<std::int64_t>(r.at(0, "value")) == want);
  }
  auto big = bench_fib(*rt, 30, 20);
  CHECK(std::get<std::int64_t>(big.at(0, "value")) == 832040);
  CHECK(std::get<std::int64_t>(big.at(0, "tasks")) > 1);
  CHECK_THROWS_AS(bench_fib(*rt, -1, 5), error);
}

TEST_CASE("report: CSV round trip keeps values and types") {
  benchmark_report r;
  r.columns = {"name", "count", "ratio", "note"};
  r.add_row({std::string("a"), std::int64_t{-3}, 55.0, std::string("with, comma")});
  r.add_row({std::string("b\"q"), std::int64_t{0}, 0.1, std::string("42")});
  r.add_row({std::string(""), std::numeric_limits<std::int64_t>::max(), 1e-300,
             std::string("line\nbreak")});
  r.add_row({std::string("x"), std::int64_t{1}, std::numeric_limits<double>::infinity(),
             std::string("-0.5")});
  auto csv = r.to_csv();
  CHECK(csv.substr(0, csv.find('\n')) == "name,count,ratio,note");
  CHECK(csv.find('\r') == std::string::npos);
  CHECK(benchmark_report::parse_csv(csv) == r);
  CHECK(format_cell(55.0) == "55.0");
  CHECK(format_cell(0.1) == "0.1");
  CHECK_THROWS_AS(r.add_row({std::int64_t{1}}), error);
}

TEST_CASE("stencil: serial reference matches the oracle bit for bit") {
  auto u0 = stencil_initial(37, "ramp");
  CHECK(stencil_serial(u0, 50, stencil_boundary::fixed_zero) == heat_oracle(u0, 50, false));
  CHECK(stencil_serial(u0, 50, stencil_boundary::zero_flux) == heat_oracle(u0, 50, true));
}

TEST_CASE("stencil: spike decays with zero boundaries, is conserved with zero flux") {
  auto u0 = stencil_initial(16, "spike");
  auto leak = stencil_serial(u0, 200, stencil_boundary::fixed_zero);
  auto keep = stencil_serial(u0, 200, stencil_boundary::zero_flux);
  double sum_leak = 0, sum_keep = 0;
  for (double x : leak) sum_leak += x;
  for (double x : keep) sum_keep += x;
  CHECK(sum_leak < 1.0);
  CHECK(sum_keep == doctest::Approx(1.0).epsilon(1e-12));
  for (double x : leak) CHECK(x >= 0.0);
}

TEST_CASE("stencil: distributed run matches the oracle") {
  local_cluster c(2);
  auto u0 = stencil_initial(64, "spike");
  auto got = run_stencil(c[0], u0, 100, stencil_boundary::fixed_zero);
  CHECK(max_abs_diff(got, heat_oracle(u0, 100, false)) <= 1e-12);

  auto flat = stencil_initial(64, "uniform");
  CHECK(run_stencil(c[0], flat, 25, stencil_boundary::zero_flux) == flat);

  auto ramp = stencil_initial(8, "ramp");
  CHECK(max_abs_diff(run_stencil(c[1], ramp, 10, stencil_boundary::zero_flux),
                     heat_oracle(ramp, 10, true)) <= 1e-12);
  CHECK_THROWS_AS(run_stencil(c[0], stencil_initial(63, "spike"), 1, stencil_boundary::fixed_zero),
                  error);
}

TEST_CASE("stencil: one cell per locality") {
  local_cluster c(3);
  auto u0 = stencil_initial(3, "ramp");
  CHECK(max_abs_diff(run_stencil(c[0], u0, 20, stencil_boundary::fixed_zero),
                     heat_oracle(u0, 20, false)) <= 1e-12);
}

TEST_CASE("policy bench: every policy runs every task") {
  policy_bench_params p;
  p.tasks = 400;
  p.task_us = 20;
  p.workers = 2;
  p.workload = task_workload::sleep;
  for (auto skew : {policy_skew::balanced, policy_skew::all_to_0}) {
    p.skew = skew;
    auto r = bench_policy_compare(p);
    REQUIRE(r.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::get<std::int64_t>(r.at(i, "executed")) == 400);
    }
    if (skew == policy_skew::all_to_0) {
      CHECK(std::get<std::string>(r.at(0, "policy")) == "static");
      CHECK(std::get<std::int64_t>(r.at(0, "steals_succeeded")) == 0);
    }
  }
}

// amt: command-line front end for the runtime.
//
//   amt run --config FILE --locality K
//   amt bench fib|stencil|policy [options]
//   amt counters dump [--prefix P] [--config FILE]
//   amt demo migrate
//
// Exit codes: 0 ok, 1 usage error, 2 runtime failure.

#include "launcher.hpp"

#include "amt/apps/bench.hpp"
#include "amt/apps/stencil.hpp"
#include "amt/runtime/cluster.hpp"
#include "amt/runtime/components.hpp"
#include "amt/runtime/runtime.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <csignal>
#include <cstdlib>
#include <iostream>

using namespace amt;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_failure = 2;

/// Bad input found after argument parsing (config contents, values).
struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::atomic<bool> interrupted{false};

extern "C" void on_signal(int) { interrupted.store(true); }

struct common_options {
  std::string config;
  std::vector<std::string> settings;
  std::optional<std::size_t> workers;
  std::optional<std::string> policy;
  std::optional<std::string> log;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config, "Config file (key = value lines); defaults to $AMT_CONFIG");
    cmd.add_option("--set", settings, "Override a config key, e.g. --set scheduler.workers=8");
    cmd.add_option("--workers", workers, "Worker threads per locality");
    cmd.add_option("--policy", policy, "static, local_priority or hierarchical");
    cmd.add_option("--log-level", log, "trace, debug, info, warn, error or off");
  }

  /// Config file (or $AMT_CONFIG), then --set, then the dedicated flags.
  runtime_config load() const {
    try {
      runtime_config cfg;
      std::string path = config;
      if (path.empty()) {
        if (const char* env = std::getenv("AMT_CONFIG"); env && *env) path = env;
      }
      if (!path.empty()) cfg = load_config(path);
      for (const auto& s : settings) {
        auto eq = s.find('=');
        if (eq == std::string::npos) throw usage_error("--set expects key=value, got '" + s + "'");
        apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
      }
      if (workers) apply_setting(cfg, "scheduler.workers", std::to_string(*workers));
      if (policy) apply_setting(cfg, "scheduler.policy", *policy);
      if (log) apply_setting(cfg, "log_level", *log);
      return cfg;
    } catch (const error& e) {
      throw usage_error(e.what());
    }
  }
};

runtime_config single_locality(runtime_config cfg) {
  cfg.localities.clear();
  cfg.this_locality = 0;
  return cfg;
}

/// N localities: this process is locality 0; the rest run in-process or as
/// `amt run` children on loopback.
class driver_cluster {
 public:
  driver_cluster(std::uint32_t n, const runtime_config& base, bool processes) {
    if (n == 0) throw usage_error("--localities must be at least 1");
    if (!processes || n == 1) {
      inproc_ = std::make_unique<local_cluster>(n, base.scheduler, base.log);
      return;
    }
    auto cfg = tools::loopback_config(n, base.scheduler, base.log);
    cfg.this_locality = 0;
    root_ = std::make_unique<runtime>(cfg);
    children_ = std::make_unique<tools::child_localities>(tools::self_exe(), cfg);
    root_->start();
  }

  ~driver_cluster() { stop(); }

  runtime& root() { return inproc_ ? (*inproc_)[0] : *root_; }

  void stop() {
    if (inproc_) {
      inproc_->shutdown();
      return;
    }
    if (!root_) return;
    root_->request_cluster_shutdown();
    root_->shutdown();
    if (children_ && !children_->wait_all(std::chrono::milliseconds(10000))) {
      std::cerr << "amt: warning: a child locality did not exit cleanly\n";
    }
    children_.reset();
    root_.reset();
  }

 private:
  std::unique_ptr<local_cluster> inproc_;
  std::unique_ptr<runtime> root_;
  std::unique_ptr<tools::child_localities> children_;
};

bool process_mode(const std::string& mode) {
  if (mode == "process") return true;
  if (mode == "inproc") return false;
  throw usage_error("--mode must be process or inproc, got '" + mode + "'");
}

// Subcommands.

int cmd_run(const common_options& opts, std::uint32_t locality) {
  auto cfg = opts.load();
  cfg.this_locality = locality;
  try {
    cfg.validate();
  } catch (const error& e) {
    throw usage_error(e.what());
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  auto rt = runtime::boot(cfg);
  std::cout << fmt::format("locality {} of {} ready", rt->locality(), rt->locality_count())
            << std::endl;
  rt->wait_for_shutdown_request(&interrupted);
  rt->shutdown();
  return 0;
}

int cmd_bench_fib(const common_options& opts, std::int64_t n, std::int64_t cutoff) {
  auto rt = runtime::boot(single_locality(opts.load()));
  auto report = bench_fib(*rt, n, cutoff);
  std::cout << report.to_csv();
  return 0;
}

int cmd_bench_stencil(const common_options& opts, std::size_t cells, std::size_t steps,
                      std::uint32_t localities, const std::string& init,
                      const std::string& boundary_name, const std::string& mode) {
  stencil_boundary boundary;
  if (boundary_name == "fixed-zero") {
    boundary = stencil_boundary::fixed_zero;
  } else if (boundary_name == "zero-flux") {
    boundary = stencil_boundary::zero_flux;
  } else {
    throw usage_error("--boundary must be fixed-zero or zero-flux");
  }
  if (localities == 0 || cells % localities != 0) {
    throw usage_error("--cells must be a multiple of --localities");
  }
  std::vector<double> u0;
  try {
    u0 = stencil_initial(cells, init);
  } catch (const error& e) {
    throw usage_error(e.what());
  }
  auto base = opts.load();
  driver_cluster cluster(localities, base, process_mode(mode));
  auto t0 = std::chrono::steady_clock::now();
  auto u = run_stencil(cluster.root(), u0, steps, boundary);
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  cluster.stop();

  auto ref = stencil_serial(u0, steps, boundary);
  double err = 0, sum = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    err = std::max(err, std::abs(u[i] - ref[i]));
    sum += u[i];
  }
  benchmark_report r;
  r.columns = {"benchmark", "cells", "steps", "localities", "init", "boundary",
               "checksum", "max_abs_err", "wall_time_ms"};
  r.add_row({std::string("stencil"), static_cast<std::int64_t>(cells),
             static_cast<std::int64_t>(steps), static_cast<std::int64_t>(localities), init,
             boundary_name, sum, err, ms});
  std::cout << r.to_csv();
  return err <= 1e-12 ? 0 : exit_failure;
}

int cmd_bench_policy(policy_bench_params p, const std::string& skew, const std::string& workload,
                     const std::vector<std::string>& policies) {
  try {
    p.skew = parse_skew(skew);
    p.workload = parse_workload(workload);
    if (!policies.empty()) {
      p.policies.clear();
      for (const auto& name : policies) {
        auto k = parse_policy(name);
        if (!k) throw usage_error("unknown policy '" + name + "'");
        p.policies.push_back(*k);
      }
    }
  } catch (const error& e) {
    throw usage_error(e.what());
  }
  if (p.workers == 0) throw usage_error("--workers must be positive");
  std::cout << bench_policy_compare(p).to_csv();
  return 0;
}

void dump_counters(runtime& rt, const std::string& prefix) {
  auto names = rt.counters().list(prefix).get();
  benchmark_report r;
  r.columns = {"name", "value", "sampled_at_ns"};
  std::vector<future<counter_value>> values;
  for (const auto& n : names) values.push_back(rt.counters().query(n));
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto v = values[i].get();
    if (v.status != counter_status::ok) continue;
    r.add_row({names[i], v.value, v.sampled_at_ns});
  }
  std::cout << r.to_csv();
}

int cmd_counters_dump(const common_options& opts, const std::string& prefix,
                      std::optional<std::uint32_t> locality, std::uint32_t spawn,
                      const std::string& mode) {
  auto cfg = opts.load();
  if (cfg.locality_count() > 1) {
    // Join an existing cluster as the given locality.
    cfg.this_locality = locality.value_or(0);
    try {
      cfg.validate();
    } catch (const error& e) {
      throw usage_error(e.what());
    }
    auto rt = runtime::boot(cfg);
    dump_counters(*rt, prefix);
    rt->shutdown();
    return 0;
  }
  driver_cluster cluster(spawn, cfg, process_mode(mode));
  dump_counters(cluster.root(), prefix);
  return 0;
}

int cmd_demo_migrate(const common_options& opts, std::uint32_t localities,
                     const std::string& mode) {
  if (localities < 2) throw usage_error("--localities must be at least 2 to migrate");
  driver_cluster cluster(localities, opts.load(), process_mode(mode));
  auto& rt = cluster.root();
  auto g = rt.agas().register_object(std::make_shared<counter_object>(41));
  rt.agas().register_name("/demo/counter", g).get();
  std::cout << "registered counter " << g.to_string() << " on locality 0 with value 41\n";

  const std::uint32_t dest = localities - 1;
  rt.agas().migrate(g, dest).get();
  auto owner = rt.agas().resolve(g).get().locality;
  std::cout << "migrated to locality " << dest << "; resolve reports locality " << owner << "\n";

  auto after = rt.apply<std::int64_t>(g, "counter/add", 1).get();
  auto read_remote = rt.apply<std::int64_t>(g, "counter/get").get();
  auto by_name = rt.apply<std::int64_t>(rt.agas().resolve_name("/demo/counter").get(),
                                        "counter/get").get();
  std::cout << "add(1) through the same GID returned " << after << "; get returned "
            << read_remote << " (by name: " << by_name << ")\n";
  bool ok = owner == dest && after == 42 && read_remote == 42 && by_name == 42 &&
            rt.agas().local_object(g) == nullptr;
  std::cout << "transparent: " << (ok ? "yes" : "no") << "\n";
  return ok ? 0 : exit_failure;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous many-task runtime: boot localities, run benchmarks and demos"};
  app.require_subcommand(1);
  common_options opts;

  auto* run = app.add_subcommand("run", "Boot one locality and serve until asked to stop");
  std::uint32_t run_locality = 0;
  opts.attach(*run);
  run->add_option("--locality", run_locality, "This locality's id")->required();

  auto* bench = app.add_subcommand("bench", "Benchmarks (CSV on stdout)");
  bench->require_subcommand(1);

  auto* fib = bench->add_subcommand("fib", "Futurized Fibonacci");
  std::int64_t fib_n = 30, fib_cutoff = 20;
  opts.attach(*fib);
  fib->add_option("--n", fib_n, "Index to compute")->check(CLI::Range(0, 92));
  fib->add_option("--cutoff", fib_cutoff, "Serial below this index");

  auto* stencil = bench->add_subcommand("stencil", "Distributed 1D heat stencil");
  std::size_t st_cells = 64, st_steps = 100;
  std::uint32_t st_localities = 2;
  std::string st_init = "spike", st_boundary = "fixed-zero", st_mode = "process";
  opts.attach(*stencil);
  stencil->add_option("--cells", st_cells, "Total cells");
  stencil->add_option("--steps", st_steps, "Time steps");
  stencil->add_option("--localities", st_localities, "Number of localities");
  stencil->add_option("--init", st_init, "Initial field: spike, uniform or ramp");
  stencil->add_option("--boundary", st_boundary, "fixed-zero or zero-flux");
  stencil->add_option("--mode", st_mode, "process (child processes) or inproc");

  auto* policy = bench->add_subcommand("policy", "Compare the three scheduling policies");
  policy_bench_params pp;
  std::string pol_skew = "all-to-0", pol_workload = "auto";
  std::vector<std::string> pol_policies;
  policy->add_option("--tasks", pp.tasks, "Number of tasks");
  policy->add_option("--task-us", pp.task_us, "Duration of each task in microseconds");
  policy->add_option("--skew", pol_skew, "balanced or all-to-0");
  policy->add_option("--workers", pp.workers, "Worker threads");
  policy->add_option("--workload", pol_workload, "spin, sleep or auto");
  policy->add_option("--policies", pol_policies, "Subset of policies to run");

  auto* counters = app.add_subcommand("counters", "Performance counters");
  counters->require_subcommand(1);
  auto* dump = counters->add_subcommand("dump", "Print counters as CSV: name,value,sampled_at_ns");
  std::string dump_prefix = "/";
  std::optional<std::uint32_t> dump_locality;
  std::uint32_t dump_spawn = 1;
  std::string dump_mode = "process";
  opts.attach(*dump);
  dump->add_option("--prefix,prefix", dump_prefix, "Name prefix");
  dump->add_option("--locality", dump_locality, "Join the configured cluster as this locality");
  dump->add_option("--localities", dump_spawn, "Without a cluster config: boot this many");
  dump->add_option("--mode", dump_mode, "process or inproc (with --localities)");

  auto* demo = app.add_subcommand("demo", "Demonstrations");
  demo->require_subcommand(1);
  auto* migrate = demo->add_subcommand("migrate", "Move a counter object and keep using it");
  std::uint32_t mig_localities = 2;
  std::string mig_mode = "process";
  opts.attach(*migrate);
  migrate->add_option("--localities", mig_localities, "Number of localities");
  migrate->add_option("--mode", mig_mode, "process or inproc");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  try {
    if (*run) return cmd_run(opts, run_locality);
    if (*fib) return cmd_bench_fib(opts, fib_n, fib_cutoff);
    if (*stencil) {
      return cmd_bench_stencil(opts, st_cells, st_steps, st_localities, st_init, st_boundary,
                               st_mode);
    }
    if (*policy) return cmd_bench_policy(pp, pol_skew, pol_workload, pol_policies);
    if (*dump) return cmd_counters_dump(opts, dump_prefix, dump_locality, dump_spawn, dump_mode);
    if (*migrate) return cmd_demo_migrate(opts, mig_localities, mig_mode);
  } catch (const usage_error& e) {
    std::cerr << "amt: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "amt: error: " << e.what() << "\n";
    return exit_failure;
  }
  return exit_usage;
}

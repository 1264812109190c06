#include "amt/runtime/cluster.hpp"

#include <exception>
#include <thread>

namespace amt {

local_cluster::local_cluster(std::uint32_t localities, scheduler_config sched, log_level log) {
  if (localities == 0) throw_error(errc::invalid_argument, "a cluster needs at least one locality");
  for (std::uint32_t i = 0; i < localities; ++i) {
    runtime_config cfg;
    for (std::uint32_t j = 0; j < localities; ++j) cfg.localities.push_back({j, "127.0.0.1", 0});
    cfg.this_locality = i;
    cfg.scheduler = sched;
    cfg.log = log;
    nodes_.push_back(std::make_unique<runtime>(std::move(cfg)));
  }
  for (auto& node : nodes_) {
    for (std::uint32_t j = 0; j < localities; ++j) {
      node->set_endpoint(j, "127.0.0.1", nodes_[j]->bound_port());
    }
  }
  // start() blocks in the boot barrier, so every locality needs its own thread.
  std::vector<std::exception_ptr> errors(nodes_.size());
  std::vector<std::thread> boot;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    boot.emplace_back([this, i, &errors] {
      try {
        nodes_[i]->start();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& t : boot) t.join();
  for (auto& e : errors) {
    if (e) {
      shutdown();
      std::rethrow_exception(e);
    }
  }
}

local_cluster::~local_cluster() { shutdown(); }

void local_cluster::shutdown() {
  for (auto& node : nodes_) node->begin_shutdown();
  for (auto& node : nodes_) node->shutdown();
}

} // namespace amt

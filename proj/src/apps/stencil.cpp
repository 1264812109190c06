#include "amt/apps/stencil.hpp"

#include "amt/runtime/components.hpp"
#include "amt/runtime/runtime.hpp"
#include "amt/tasking/async.hpp"

#include <algorithm>
#include <atomic>
#include <optional>

namespace amt {

namespace {

std::string halo_name(const std::string& run, std::int64_t index, std::string_view side) {
  return "/stencil/" + run + "/halo/" + std::to_string(index) + "/" + std::string(side);
}

/// One slice of the field plus the two channels its neighbours write into.
class partition final : public component {
 public:
  static constexpr const char* type = "amt/stencil/partition";

  partition(std::string run, std::int64_t index, std::int64_t count, std::vector<double> cells,
            stencil_boundary boundary)
      : run_(std::move(run)),
        index_(index),
        count_(count),
        u_(std::move(cells)),
        boundary_(boundary) {}

  std::string type_name() const override { return type; }

  void publish(runtime& rt) {
    from_left_ = std::make_shared<channel_object>();
    from_right_ = std::make_shared<channel_object>();
    left_gid_ = rt.agas().register_object(from_left_);
    right_gid_ = rt.agas().register_object(from_right_);
    auto a = rt.agas().register_name(halo_name(run_, index_, "from_left"), left_gid_);
    auto b = rt.agas().register_name(halo_name(run_, index_, "from_right"), right_gid_);
    a.get();
    b.get();
  }

  std::vector<double> run(runtime& rt, std::int64_t steps) {
    // My left edge goes into the left neighbour's from_right channel.
    std::optional<remote_channel<double>> to_left, to_right;
    if (index_ > 0) {
      to_left = remote_channel<double>::connect(rt, halo_name(run_, index_ - 1, "from_right")).get();
    }
    if (index_ + 1 < count_) {
      to_right = remote_channel<double>::connect(rt, halo_name(run_, index_ + 1, "from_left")).get();
    }

    const std::size_t n = u_.size();
    std::vector<double> next(n);
    std::vector<future<void>> sends;
    for (std::int64_t s = 0; s < steps; ++s) {
      if (to_left) sends.push_back(to_left->send(u_.front()));
      if (to_right) sends.push_back(to_right->send(u_.back()));

      auto left = halo(from_left_, to_left.has_value(), u_.front());
      auto right = halo(from_right_, to_right.has_value(), u_.back());

      // Interior cells need no halo and proceed while the exchange is in flight.
      auto interior = rt.spawn([this, &next, n] {
        for (std::size_t i = 1; i + 1 < n; ++i) next[i] = stencil_cell(u_[i - 1], u_[i], u_[i + 1]);
      });
      if (n == 1) {
        auto both = when_all(std::move(left), std::move(right)).get();
        next[0] = stencil_cell(std::get<0>(both), u_[0], std::get<1>(both));
      } else {
        next[0] = stencil_cell(left.get(), u_[0], u_[1]);
        next[n - 1] = stencil_cell(u_[n - 2], u_[n - 1], right.get());
      }
      interior.get();
      u_.swap(next);
    }
    for (auto& f : sends) f.get();
    return u_;
  }

  void teardown(runtime& rt) {
    for (auto side : {"from_left", "from_right"}) {
      try {
        rt.agas().unregister_name(halo_name(run_, index_, side)).get();
      } catch (const error&) {
      }
    }
    (void)rt.agas().unregister(left_gid_);
    (void)rt.agas().unregister(right_gid_);
  }

 private:
  /// Halo value for one side: from the neighbour's channel, or the ghost
  /// value at the domain edge.
  future<double> halo(const std::shared_ptr<channel_object>& in, bool has_neighbour,
                      double edge) const {
    if (!has_neighbour) {
      return make_ready_future(boundary_ == stencil_boundary::zero_flux ? edge : 0.0);
    }
    return detail::map_inline(in->chan().recv(), [](const value& v) { return v.as_float64(); });
  }

  std::string run_;
  std::int64_t index_;
  std::int64_t count_;
  std::vector<double> u_;
  stencil_boundary boundary_;
  std::shared_ptr<channel_object> from_left_, from_right_;
  gid left_gid_, right_gid_;
};

std::atomic<std::uint64_t> next_run{0};

partition& partition_of(action_context& ctx) {
  auto* p = dynamic_cast<partition*>(ctx.object.get());
  if (!p) detail::throw_wrong_component(ctx);
  return *p;
}

} // namespace

void register_stencil_actions() {
  register_plain_action("amt/stencil/setup",
                        [](runtime& rt, std::string run, std::int64_t index, std::int64_t count,
                           std::vector<double> cells, std::int64_t boundary) {
                          auto p = std::make_shared<partition>(
                              std::move(run), index, count, std::move(cells),
                              static_cast<stencil_boundary>(boundary));
                          p->publish(rt);
                          return rt.agas().register_object(p);
                        });
  auto& reg = action_registry::instance();
  reg.add("amt/stencil/run", {value_tag::int64}, action_target::object,
          [](action_context& ctx, value_list& a) {
            return to_value(partition_of(ctx).run(ctx.rt, a[0].as_int64()));
          });
  reg.add("amt/stencil/teardown", {}, action_target::object,
          [](action_context& ctx, value_list&) {
            partition_of(ctx).teardown(ctx.rt);
            return value();
          });
}

std::vector<double> stencil_initial(std::size_t cells, std::string_view shape) {
  std::vector<double> u(cells, 0.0);
  if (shape == "spike") {
    if (cells > 0) u[cells / 2] = 1.0;
  } else if (shape == "uniform") {
    std::fill(u.begin(), u.end(), 1.0);
  } else if (shape == "ramp") {
    for (std::size_t i = 0; i < cells; ++i) u[i] = static_cast<double>(i) / static_cast<double>(cells);
  } else {
    throw_error(errc::invalid_argument, "unknown initial field '" + std::string(shape) +
                                            "' (expected spike, uniform or ramp)");
  }
  return u;
}

std::vector<double> stencil_serial(std::vector<double> u, std::size_t steps,
                                   stencil_boundary boundary) {
  const std::size_t n = u.size();
  if (n == 0) return u;
  std::vector<double> next(n);
  for (std::size_t s = 0; s < steps; ++s) {
    double lo = boundary == stencil_boundary::zero_flux ? u.front() : 0.0;
    double hi = boundary == stencil_boundary::zero_flux ? u.back() : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double l = i == 0 ? lo : u[i - 1];
      double r = i + 1 == n ? hi : u[i + 1];
      next[i] = stencil_cell(l, u[i], r);
    }
    u.swap(next);
  }
  return u;
}

std::vector<double> run_stencil(runtime& rt, const std::vector<double>& u0, std::size_t steps,
                                stencil_boundary boundary) {
  const std::size_t parts = rt.locality_count();
  if (u0.empty() || u0.size() % parts != 0) {
    throw_error(errc::invalid_argument, "cells (" + std::to_string(u0.size()) +
                                            ") must be a positive multiple of the locality count (" +
                                            std::to_string(parts) + ")");
  }
  const std::size_t slice = u0.size() / parts;
  const std::string run = std::to_string(rt.locality()) + "-" + std::to_string(next_run++);

  std::vector<future<gid>> made;
  for (std::size_t k = 0; k < parts; ++k) {
    std::vector<double> cells(u0.begin() + static_cast<std::ptrdiff_t>(k * slice),
                              u0.begin() + static_cast<std::ptrdiff_t>((k + 1) * slice));
    made.push_back(rt.apply<gid>(locality_gid(static_cast<std::uint32_t>(k)), "amt/stencil/setup",
                                 run, static_cast<std::int64_t>(k),
                                 static_cast<std::int64_t>(parts), std::move(cells),
                                 static_cast<std::int64_t>(boundary)));
  }
  std::vector<gid> ids;
  for (auto& f : made) ids.push_back(f.get());

  // Every partition has published its channels before any of them starts.
  std::vector<future<std::vector<double>>> runs;
  for (const auto& g : ids) {
    runs.push_back(rt.apply<std::vector<double>>(g, "amt/stencil/run", static_cast<std::int64_t>(steps)));
  }
  std::vector<double> out;
  out.reserve(u0.size());
  std::exception_ptr failure;
  for (auto& f : runs) {
    try {
      auto part = f.get();
      out.insert(out.end(), part.begin(), part.end());
    } catch (...) {
      if (!failure) failure = std::current_exception();
    }
  }
  for (const auto& g : ids) {
    try {
      rt.apply(g, "amt/stencil/teardown").get();
      rt.agas().unregister(g).get();
    } catch (const error&) {
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

} // namespace amt

#include "amt/counters/counters.hpp"

#include "amt/runtime/runtime.hpp"

#include <cctype>
#include <charconv>

namespace amt {

namespace {

std::vector<std::string_view> split_path(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 1;
  while (pos <= s.size()) {
    auto next = s.find('/', pos);
    if (next == std::string_view::npos) next = s.size();
    out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

bool plain_segment(std::string_view seg) {
  if (seg.empty()) return false;
  for (unsigned char c : seg) {
    if (!(std::isalnum(c) || c == '-' || c == '_' || c == '.')) return false;
  }
  return true;
}

/// "word#N" -> (word, N)
std::optional<std::pair<std::string, std::uint32_t>> instance_segment(std::string_view seg) {
  auto hash = seg.find('#');
  if (hash == std::string_view::npos || hash == 0) return std::nullopt;
  auto word = seg.substr(0, hash);
  auto num = seg.substr(hash + 1);
  if (!plain_segment(word) || num.empty()) return std::nullopt;
  std::uint32_t n = 0;
  auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), n);
  if (ec != std::errc{} || p != num.data() + num.size()) return std::nullopt;
  return std::pair{std::string(word), n};
}

[[noreturn]] void malformed(std::string_view name, const std::string& why) {
  throw_error(errc::invalid_argument, "malformed counter name '" + std::string(name) + "': " + why);
}

} // namespace

counter_path parse_counter_path(std::string_view name) {
  if (name.empty() || name.front() != '/') malformed(name, "must begin with '/'");
  if (name.size() > 255) malformed(name, "longer than 255 bytes");
  auto segs = split_path(name);
  if (segs.size() < 3) malformed(name, "expected /component/locality#L/metric");
  counter_path out;
  if (!plain_segment(segs[0])) malformed(name, "bad component segment");
  out.component = std::string(segs[0]);
  auto loc = instance_segment(segs[1]);
  if (!loc || loc->first != "locality") malformed(name, "second segment must be locality#L");
  out.locality = loc->second;
  std::size_t i = 2;
  if (auto inst = instance_segment(segs[2])) {
    out.instance = inst;
    i = 3;
  }
  for (; i < segs.size(); ++i) {
    if (!plain_segment(segs[i])) malformed(name, "bad metric segment '" + std::string(segs[i]) + "'");
    out.metric.emplace_back(segs[i]);
  }
  if (out.metric.empty()) malformed(name, "missing metric");
  const auto& last = out.metric.back();
  if (out.metric.size() == 1 && (last == "cumulative" || last == "instantaneous")) {
    malformed(name, "missing metric before the kind suffix");
  }
  return out;
}

std::string counter_path::str() const {
  std::string s = "/" + component + "/locality#" + std::to_string(locality);
  if (instance) s += "/" + instance->first + "#" + std::to_string(instance->second);
  for (const auto& m : metric) s += "/" + m;
  return s;
}

void counter_source::reset() {
  if (desc_.kind == counter_kind::gauge) {
    throw_error(errc::unsupported, "counter '" + desc_.name + "' is a gauge and cannot be reset");
  }
  baseline_.store(desc_.sampler(), std::memory_order_release);
}

future<gid> counter_registry::register_counter(counter_descriptor desc) {
  gid g;
  std::string name = desc.name;
  try {
    auto path = parse_counter_path(name);
    if (path.locality != rt_.locality()) {
      throw_error(errc::invalid_argument, "counter '" + name + "' names locality " +
                                              std::to_string(path.locality) +
                                              " but is registered on " +
                                              std::to_string(rt_.locality()));
    }
    if (!desc.sampler) throw_error(errc::invalid_argument, "counter '" + name + "' has no sampler");
    g = rt_.agas().register_object(std::make_shared<counter_source>(std::move(desc)));
  } catch (...) {
    return make_exceptional_future<gid>(std::current_exception());
  }
  promise<gid> out;
  auto published = rt_.agas().register_name(name, g);
  published.state()->on_ready([this, published, out, g, name]() mutable {
    if (published.has_exception()) {
      // Keep the original mapping intact; drop the orphaned object.
      (void)rt_.agas().unregister(g);
      out.set_exception(published.exception());
      return;
    }
    {
      std::lock_guard lock(cache_mutex_);
      name_cache_[name] = g;
    }
    out.set_value(g);
  });
  return out.get_future();
}

future<gid> counter_registry::lookup(const std::string& name) {
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = name_cache_.find(name); it != name_cache_.end()) return make_ready_future(it->second);
  }
  return detail::map_inline(rt_.agas().resolve_name(name), [this, name](const gid& g) {
    std::lock_guard lock(cache_mutex_);
    name_cache_[name] = g;
    return g;
  });
}

future<counter_value> counter_registry::query(const std::string& name) {
  promise<counter_value> out;
  auto unavailable = [](const std::exception_ptr& ep) {
    errc code{};
    return error_code_of(ep, code) && (code == errc::not_found || code == errc::invalid_argument);
  };
  auto found = lookup(name);
  found.state()->on_ready([this, found, out, unavailable]() mutable {
    if (found.has_exception()) {
      if (unavailable(found.exception())) {
        out.set_value(counter_value{});
      } else {
        out.set_exception(found.exception());
      }
      return;
    }
    auto sampled = rt_.parcels().apply(found.get(), sys::counter_sample, {});
    sampled.state()->on_ready([sampled, out, unavailable]() mutable {
      if (sampled.has_exception()) {
        if (unavailable(sampled.exception())) {
          out.set_value(counter_value{});
        } else {
          out.set_exception(sampled.exception());
        }
        return;
      }
      auto sample = sampled.get();
      const auto& xs = sample.as_list();
      out.set_value(counter_value{xs.at(0).as_int64(), xs.at(1).as_int64(), counter_status::ok});
    });
  });
  return out.get_future();
}

future<std::vector<std::string>> counter_registry::list(const std::string& prefix) {
  return detail::map_inline(rt_.agas().list_names(prefix), [](const std::vector<std::string>& all) {
    std::vector<std::string> out;
    for (const auto& n : all) {
      try {
        parse_counter_path(n);
        out.push_back(n);
      } catch (const error&) {
        // Not a counter (channels and application names share the service).
      }
    }
    return out;
  });
}

future<void> counter_registry::reset(const std::string& name) {
  return detail::chain_inline(lookup(name), [this](const gid& g) {
    return detail::map_inline(rt_.parcels().apply(g, sys::counter_reset, {}), [](const value&) {});
  });
}

void counter_registry::register_builtins() {
  auto L = std::to_string(rt_.locality());
  auto sched = rt_.sched();
  std::vector<future<gid>> pending;
  auto add = [&](std::string name, counter_kind kind, std::function<std::int64_t()> f) {
    pending.push_back(register_counter(counter_descriptor{std::move(name), kind, std::move(f)}));
  };
  using k = counter_kind;
  auto i64 = [](auto v) { return static_cast<std::int64_t>(v); };

  const std::string sp = "/scheduler/locality#" + L;
  for (std::size_t w = 0; w < sched.worker_count(); ++w) {
    auto wp = sp + "/worker#" + std::to_string(w);
    add(wp + "/tasks/executed/cumulative", k::monotonic,
        [=] { return i64(sched.stats().workers[w].tasks_executed); });
    add(wp + "/steals/attempted/cumulative", k::monotonic,
        [=] { return i64(sched.stats().workers[w].steal_attempts); });
    add(wp + "/steals/succeeded/cumulative", k::monotonic,
        [=] { return i64(sched.stats().workers[w].steals_succeeded); });
    add(wp + "/queue/length/instantaneous", k::gauge,
        [=] { return i64(sched.stats().workers[w].queue_length); });
  }
  add(sp + "/tasks/executed/cumulative", k::monotonic,
      [=] { return i64(sched.stats().total_executed()); });
  add(sp + "/steals/attempted/cumulative", k::monotonic,
      [=] { return i64(sched.stats().total_steal_attempts()); });
  add(sp + "/steals/succeeded/cumulative", k::monotonic,
      [=] { return i64(sched.stats().total_steals()); });
  add(sp + "/queue/length/instantaneous", k::gauge, [=] {
    std::int64_t n = 0;
    for (const auto& w : sched.stats().workers) n += i64(w.queue_length);
    return n;
  });

  runtime* rt = &rt_;
  const std::string pp = "/parcel/locality#" + L;
  add(pp + "/sent/cumulative", k::monotonic,
      [rt] { return rt->transport() ? rt->transport()->frames_sent() : 0; });
  add(pp + "/received/cumulative", k::monotonic,
      [rt] { return rt->transport() ? rt->transport()->frames_received() : 0; });
  add(pp + "/forwarded/cumulative", k::monotonic, [rt] { return rt->parcels().forwarded(); });
  add(pp + "/bytes-sent/cumulative", k::monotonic,
      [rt] { return rt->transport() ? rt->transport()->bytes_sent() : 0; });
  for (std::uint32_t peer = 0; peer < rt_.locality_count(); ++peer) {
    if (peer == rt_.locality()) continue;
    auto peer_prefix = pp + "/peer#" + std::to_string(peer);
    add(peer_prefix + "/sent/cumulative", k::monotonic,
        [rt, peer] { return rt->transport() ? rt->transport()->traffic(peer).frames_sent : 0; });
    add(peer_prefix + "/received/cumulative", k::monotonic, [rt, peer] {
      return rt->transport() ? rt->transport()->traffic(peer).frames_received : 0;
    });
  }

  const std::string ap = "/agas/locality#" + L;
  add(ap + "/objects/live/instantaneous", k::gauge, [rt] { return rt->agas().live_objects(); });
  add(ap + "/migrations/cumulative", k::monotonic, [rt] { return rt->agas().migrations(); });

  for (auto& f : pending) f.get();
}

} // namespace amt

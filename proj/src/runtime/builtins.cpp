#include "amt/counters/counters.hpp"
#include "amt/runtime/components.hpp"
#include "amt/runtime/runtime.hpp"

#include <chrono>
#include <mutex>
#include <thread>

namespace amt {

void register_stencil_actions();

namespace {

constexpr auto t_gid = value_traits<gid>::tag;
constexpr auto t_int = value_tag::int64;
constexpr auto t_bytes = value_tag::bytes;
constexpr auto t_any = value_tag::any;

std::uint32_t as_locality(const value& v) {
  auto n = v.as_int64();
  if (n < 0 || n > 0xFFFFFFFFll) throw_error(errc::invalid_argument, "locality id out of range");
  return static_cast<std::uint32_t>(n);
}

counter_source& counter_of(action_context& ctx) {
  auto* c = dynamic_cast<counter_source*>(ctx.object.get());
  if (!c) detail::throw_wrong_component(ctx);
  return *c;
}

channel_object& channel_of(action_context& ctx) {
  auto* c = dynamic_cast<channel_object*>(ctx.object.get());
  if (!c) detail::throw_wrong_component(ctx);
  return *c;
}

void register_system_actions() {
  auto& reg = action_registry::instance();
  using at = action_target;

  // Completions and the connection greeting are consumed by the parcel
  // layer and the transport; the records only describe their payloads.
  auto consumed = [](action_context&, value_list&) -> value {
    throw_error(errc::unsupported, "protocol frame handled by the parcel layer");
  };
  reg.add_system(sys::continuation_set, "amt/continuation_set", {t_any}, at::locality, consumed);
  reg.add_system(sys::continuation_error, "amt/continuation_error", {t_int, t_bytes},
                 at::locality, consumed);
  reg.add_system(sys::hello, "amt/hello", {t_int}, at::locality, consumed);

  reg.add_system(sys::barrier_arrive, "amt/barrier_arrive", {t_int}, at::locality,
                 [](action_context& ctx, value_list& a) {
                   ctx.rt.handle_barrier_arrive(static_cast<std::uint64_t>(a[0].as_int64()));
                   return value();
                 });
  reg.add_system(sys::barrier_release, "amt/barrier_release", {t_int}, at::locality,
                 [](action_context& ctx, value_list& a) {
                   ctx.rt.handle_barrier_release(static_cast<std::uint64_t>(a[0].as_int64()));
                   return value();
                 });
  reg.add_system(sys::resolve, "amt/agas/resolve", {t_gid}, at::locality,
                 [](action_context& ctx, value_list& a) {
                   return ctx.rt.agas().handle_resolve(from_value<gid>(a[0]));
                 });
  reg.add_system(sys::cache_update, "amt/agas/cache_update", {t_gid, t_int, t_int}, at::locality,
                 [](action_context& ctx, value_list& a) {
                   ctx.rt.agas().update_cache(from_value<gid>(a[0]), as_locality(a[1]),
                                              static_cast<std::uint64_t>(a[2].as_int64()));
                   return value();
                 });
  reg.add_system(sys::name_register, "amt/agas/name_register", {t_bytes, t_gid}, at::locality,
                 [](action_context& ctx, value_list& a) {
                   ctx.rt.agas().handle_name_register(a[0].as_bytes(), from_value<gid>(a[1]));
                   return value();
                 });
  reg.add_system(sys::name_resolve, "amt/agas/name_resolve", {t_bytes}, at::locality,
                 [](action_context& ctx, value_list& a) {
                   return to_value(ctx.rt.agas().handle_name_resolve(a[0].as_bytes()));
                 });
  reg.add_system(sys::name_unregister, "amt/agas/name_unregister", {t_bytes}, at::locality,
                 [](action_context& ctx, value_list& a) {
                   ctx.rt.agas().handle_name_unregister(a[0].as_bytes());
                   return value();
                 });
  reg.add_system(sys::name_list, "amt/agas/name_list", {t_bytes}, at::locality,
                 [](action_context& ctx, value_list& a) {
                   return to_value(ctx.rt.agas().handle_name_list(a[0].as_bytes()));
                 });
  reg.add_system(sys::migrate_request, "amt/agas/migrate_request", {t_gid, t_int}, at::locality,
                 [](action_context& ctx, value_list& a) {
                   ctx.rt.agas().handle_migrate_request(from_value<gid>(a[0]), as_locality(a[1]));
                   return value();
                 });
  reg.add_system(sys::migrate_install, "amt/agas/migrate_install", {t_gid, t_bytes, t_any, t_int},
                 at::locality, [](action_context& ctx, value_list& a) {
                   ctx.rt.agas().handle_migrate_install(
                       from_value<gid>(a[0]), a[1].as_bytes(), a[2],
                       static_cast<std::uint64_t>(a[3].as_int64()));
                   return value();
                 });
  reg.add_system(sys::authority_update, "amt/agas/authority_update", {t_gid, t_int, t_int},
                 at::locality, [](action_context& ctx, value_list& a) {
                   ctx.rt.agas().handle_authority_update(
                       from_value<gid>(a[0]), as_locality(a[1]),
                       static_cast<std::uint64_t>(a[2].as_int64()));
                   return value();
                 });
  reg.add_system(sys::authority_remove, "amt/agas/authority_remove", {t_gid}, at::locality,
                 [](action_context& ctx, value_list& a) {
                   ctx.rt.agas().handle_authority_remove(from_value<gid>(a[0]));
                   return value();
                 });
  reg.add_system(sys::counter_sample, "amt/counter/sample", {}, at::object,
                 [](action_context& ctx, value_list&) {
                   auto& c = counter_of(ctx);
                   auto v = c.sample();
                   return value(value_list{value(v), value(ctx.rt.now_ns())});
                 });
  reg.add_system(sys::counter_reset, "amt/counter/reset", {}, at::object,
                 [](action_context& ctx, value_list&) {
                   counter_of(ctx).reset();
                   return value();
                 });
  reg.add_system(sys::shutdown_request, "amt/shutdown_request", {}, at::locality,
                 [](action_context& ctx, value_list&) {
                   // Peers leave right after asking; that is not a failure.
                   ctx.rt.begin_shutdown();
                   ctx.rt.handle_shutdown_request();
                   return value();
                 });
}

void register_library_actions() {
  auto& reg = action_registry::instance();
  reg.add("amt/echo", {t_any}, action_target::locality,
          [](action_context&, value_list& a) { return std::move(a[0]); });
  register_plain_action("amt/sleep_ms", [](runtime&, std::int64_t ms) {
    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  });
  register_plain_action("amt/locality", [](runtime& rt) {
    return static_cast<std::int64_t>(rt.locality());
  });

  register_component_type(counter_object::type, [](const value& state) {
    return std::make_shared<counter_object>(state.as_int64());
  });
  register_component_action<counter_object>(
      "counter/add", [](counter_object& c, std::int64_t n) { return c.add(n); });
  register_component_action<counter_object>("counter/get",
                                            [](counter_object& c) { return c.get(); });
  register_plain_action("counter/create", [](runtime& rt, std::int64_t initial) {
    return rt.agas().register_object(std::make_shared<counter_object>(initial));
  });

  reg.add("amt/channel/send", {t_any}, action_target::object,
          [](action_context& ctx, value_list& a) {
            channel_of(ctx).chan().send(std::move(a[0]));
            return value();
          });
  reg.add("amt/channel/recv", {}, action_target::object, [](action_context& ctx, value_list&) {
    return channel_of(ctx).chan().recv().get();
  });
  reg.add("amt/channel/close", {}, action_target::object, [](action_context& ctx, value_list&) {
    channel_of(ctx).chan().close();
    return value();
  });
}

} // namespace

namespace detail {

future<void> channel_send(runtime& rt, const gid& g, value v) {
  return map_inline(rt.apply(g, "amt/channel/send", std::move(v)), [](const value&) {});
}

future<value> channel_recv(runtime& rt, const gid& g) { return rt.apply(g, "amt/channel/recv"); }

future<void> channel_close(runtime& rt, const gid& g) {
  return map_inline(rt.apply(g, "amt/channel/close"), [](const value&) {});
}

} // namespace detail

void register_builtin_actions() {
  static std::once_flag once;
  std::call_once(once, [] {
    register_system_actions();
    register_library_actions();
    register_stencil_actions();
  });
}

} // namespace amt

#pragma once

#include "amt/agas/gid.hpp"
#include "amt/parcel/value.hpp"
#include "amt/parcel/wire.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <tuple>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

namespace amt {

class runtime;
class component;

/// What a handler sees of the invocation it serves.
struct action_context {
  runtime& rt;
  gid target;                        ///< GID the parcel was addressed to
  std::shared_ptr<component> object; ///< null for locality-level actions
  std::uint32_t source_locality = 0;
};

using action_handler = std::function<value(action_context&, value_list&)>;

/// Whether an action runs against an AGAS object or a locality itself.
enum class action_target { locality, object };

struct action_record {
  std::string name;
  std::uint64_t id = 0;
  std::vector<value_tag> signature;
  action_target target = action_target::object;
  action_handler handler;
};

/// Ids below this bound belong to the runtime's own protocol actions.
inline constexpr std::uint64_t system_action_limit = 0x100;

namespace sys {
inline constexpr std::uint64_t continuation_set = 1;
inline constexpr std::uint64_t continuation_error = 2;
inline constexpr std::uint64_t hello = 3;
inline constexpr std::uint64_t barrier_arrive = 4;
inline constexpr std::uint64_t barrier_release = 5;
inline constexpr std::uint64_t resolve = 6;
inline constexpr std::uint64_t cache_update = 7;
inline constexpr std::uint64_t name_register = 8;
inline constexpr std::uint64_t name_resolve = 9;
inline constexpr std::uint64_t name_unregister = 10;
inline constexpr std::uint64_t name_list = 11;
inline constexpr std::uint64_t migrate_request = 12;
inline constexpr std::uint64_t migrate_install = 13;
inline constexpr std::uint64_t authority_update = 14;
inline constexpr std::uint64_t authority_remove = 15;
inline constexpr std::uint64_t counter_sample = 16;
inline constexpr std::uint64_t counter_reset = 17;
inline constexpr std::uint64_t shutdown_request = 18;
} // namespace sys

constexpr bool is_system_action(std::uint64_t id) noexcept { return id < system_action_limit; }

/// Process-wide table of actions. Records are never removed, so pointers
/// returned by find() stay valid for the life of the process.
class action_registry {
 public:
  static action_registry& instance();

  /// Registers `name` under FNV-1a-64(name). Throws already_exists on a
  /// duplicate name and boot_failure on an id collision or an id that
  /// lands in the reserved system range.
  std::uint64_t add(std::string name, std::vector<value_tag> signature, action_target target,
                    action_handler handler);

  /// Registers a runtime protocol action under a reserved id.
  void add_system(std::uint64_t id, std::string name, std::vector<value_tag> signature,
                  action_target target, action_handler handler);

  const action_record* find(std::uint64_t id) const;
  const action_record* find(std::string_view name) const;

  /// Id of a registered action; throws unknown_action.
  std::uint64_t id_of(std::string_view name) const;

 private:
  void insert(std::unique_ptr<action_record> rec);

  mutable std::shared_mutex mutex_;
  std::unordered_map<std::uint64_t, std::unique_ptr<action_record>> by_id_;
  std::unordered_map<std::string, std::uint64_t> by_name_;
};

namespace detail {

template <typename F>
struct callable_traits : callable_traits<decltype(&F::operator())> {};

template <typename C, typename R, typename... A>
struct callable_traits<R (C::*)(A...) const> {
  using result = R;
  using args = std::tuple<A...>;
};

template <typename C, typename R, typename... A>
struct callable_traits<R (C::*)(A...)> : callable_traits<R (C::*)(A...) const> {};

template <typename R, typename... A>
struct callable_traits<R (*)(A...)> {
  using result = R;
  using args = std::tuple<A...>;
};

template <typename R, typename Call>
value invoke_to_value(Call&& call) {
  if constexpr (std::is_void_v<R>) {
    call();
    return value();
  } else {
    return to_value(call());
  }
}

template <typename F, typename Self, typename... A, std::size_t... I>
value call_typed(F& f, Self& self, value_list& args, std::index_sequence<I...>) {
  using R = std::invoke_result_t<F&, Self&, A...>;
  return invoke_to_value<R>(
      [&]() -> decltype(auto) { return f(self, from_value<std::remove_cvref_t<A>>(args[I])...); });
}

template <typename First, typename Tuple>
struct drop_first;

template <typename First, typename... Rest>
struct drop_first<First, std::tuple<First, Rest...>> {
  using type = std::tuple<Rest...>;
};

template <typename Self, typename F>
struct typed_action {
  using traits = callable_traits<std::decay_t<F>>;
  using rest = typename drop_first<std::tuple_element_t<0, typename traits::args>,
                                   typename traits::args>::type;

  template <typename... A>
  static std::vector<value_tag> signature(std::tuple<A...>*) {
    return {value_traits<std::remove_cvref_t<A>>::tag...};
  }

  template <typename... A>
  static value call(F& f, Self& self, value_list& args, std::tuple<A...>*) {
    return call_typed<F, Self, A...>(f, self, args, std::index_sequence_for<A...>{});
  }
};

[[noreturn]] void throw_wrong_component(const action_context& ctx);

} // namespace detail

/// Registers an action on component type C from `f(C&, Args...) -> R`.
/// The signature is derived from Args.
template <typename C, typename F>
std::uint64_t register_component_action(std::string name, F f) {
  using ta = detail::typed_action<C, F>;
  auto sig = ta::signature(static_cast<typename ta::rest*>(nullptr));
  return action_registry::instance().add(
      std::move(name), std::move(sig), action_target::object,
      [f = std::move(f)](action_context& ctx, value_list& args) mutable -> value {
        auto* self = dynamic_cast<C*>(ctx.object.get());
        if (!self) detail::throw_wrong_component(ctx);
        return ta::call(f, *self, args, static_cast<typename ta::rest*>(nullptr));
      });
}

/// Registers a locality-level action from `f(runtime&, Args...) -> R`.
template <typename F>
std::uint64_t register_plain_action(std::string name, F f) {
  using ta = detail::typed_action<runtime, F>;
  auto sig = ta::signature(static_cast<typename ta::rest*>(nullptr));
  return action_registry::instance().add(
      std::move(name), std::move(sig), action_target::locality,
      [f = std::move(f)](action_context& ctx, value_list& args) mutable -> value {
        return ta::call(f, ctx.rt, args, static_cast<typename ta::rest*>(nullptr));
      });
}

} // namespace amt

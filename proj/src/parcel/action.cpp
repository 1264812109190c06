#include "amt/parcel/action.hpp"

#include "amt/error.hpp"

#include <fmt/format.h>

#include <mutex>

namespace amt {

action_registry& action_registry::instance() {
  static action_registry registry;
  return registry;
}

void action_registry::insert(std::unique_ptr<action_record> rec) {
  std::unique_lock lock(mutex_);
  if (by_name_.count(rec->name)) {
    throw_error(errc::already_exists, "action '" + rec->name + "' is already registered");
  }
  if (auto it = by_id_.find(rec->id); it != by_id_.end()) {
    throw_error(errc::boot_failure,
                fmt::format("action id {:#018x} of '{}' collides with '{}'", rec->id, rec->name,
                            it->second->name));
  }
  by_name_.emplace(rec->name, rec->id);
  by_id_.emplace(rec->id, std::move(rec));
}

std::uint64_t action_registry::add(std::string name, std::vector<value_tag> signature,
                                   action_target target, action_handler handler) {
  if (name.empty()) throw_error(errc::invalid_argument, "action name must not be empty");
  auto id = fnv1a_64(name);
  if (is_system_action(id)) {
    throw_error(errc::boot_failure,
                "action '" + name + "' hashes into the reserved system id range");
  }
  auto rec = std::make_unique<action_record>(
      action_record{std::move(name), id, std::move(signature), target, std::move(handler)});
  insert(std::move(rec));
  return id;
}

void action_registry::add_system(std::uint64_t id, std::string name,
                                 std::vector<value_tag> signature, action_target target,
                                 action_handler handler) {
  if (id == 0 || !is_system_action(id)) {
    throw_error(errc::invalid_argument, "system action ids must lie in 1..255");
  }
  insert(std::make_unique<action_record>(
      action_record{std::move(name), id, std::move(signature), target, std::move(handler)}));
}

const action_record* action_registry::find(std::uint64_t id) const {
  std::shared_lock lock(mutex_);
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : it->second.get();
}

const action_record* action_registry::find(std::string_view name) const {
  std::shared_lock lock(mutex_);
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return nullptr;
  return by_id_.at(it->second).get();
}

std::uint64_t action_registry::id_of(std::string_view name) const {
  if (auto* rec = find(name)) return rec->id;
  throw_error(errc::unknown_action, "unknown action '" + std::string(name) + "'");
}

namespace detail {

void throw_wrong_component(const action_context& ctx) {
  throw_error(errc::wrong_component, "object " + ctx.target.to_string() +
                                         " does not implement the requested action");
}

} // namespace detail

} // namespace amt

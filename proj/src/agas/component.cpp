#include "amt/agas/component.hpp"

#include <map>
#include <mutex>

namespace amt {

namespace {

struct factory_table {
  std::mutex mutex;
  std::map<std::string, component_factory, std::less<>> factories;
};

factory_table& table() {
  static factory_table t;
  return t;
}

} // namespace

value component::serialize() const {
  throw_error(errc::unsupported, "component type '" + type_name() + "' is not migratable");
}

void register_component_type(std::string type, component_factory factory) {
  auto& t = table();
  std::lock_guard lock(t.mutex);
  if (!t.factories.emplace(type, std::move(factory)).second) {
    throw_error(errc::already_exists, "component type '" + type + "' is already registered");
  }
}

std::shared_ptr<component> make_component(std::string_view type, const value& state) {
  component_factory f;
  {
    auto& t = table();
    std::lock_guard lock(t.mutex);
    auto it = t.factories.find(type);
    if (it == t.factories.end()) {
      throw_error(errc::not_found, "unknown component type '" + std::string(type) + "'");
    }
    f = it->second;
  }
  return f(state);
}

} // namespace amt

#pragma once

#include "amt/parcel/value.hpp"

#include <functional>
#include <memory>
#include <string>
#include <string_view>

namespace amt {

/// Base of every object living in the global address space.
///
/// Handlers may run concurrently on one object; components guard their own
/// state. Migration only snapshots an object once no handler is running.
class component {
 public:
  virtual ~component() = default;

  /// Factory key used to rebuild the object on another locality.
  virtual std::string type_name() const = 0;

  /// Migration snapshot. Components that cannot move keep this default,
  /// which throws unsupported.
  virtual value serialize() const;
};

using component_factory = std::function<std::shared_ptr<component>(const value& state)>;

/// Registers how to rebuild `type` from its serialized state.
/// Re-registering a type replaces nothing and throws already_exists.
void register_component_type(std::string type, component_factory factory);

/// Rebuilds a component; throws not_found for unknown types.
std::shared_ptr<component> make_component(std::string_view type, const value& state);

} // namespace amt

#pragma once

#include <json.hpp>

#include "masslab/profile.hpp"

namespace masslab {

/// {n, T, flat_radius, closure, knots[], coefficients[], breaks[], squash[]?}; doubles are
/// written in shortest round-trip form so reading back reproduces the profile bit for bit.
nlohmann::json profile_to_json(const WarpedProfile& p);
WarpedProfile profile_from_json(const nlohmann::json& j);

std::string_view to_string(Closure c);

}  // namespace masslab

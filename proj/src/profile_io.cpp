#include "masslab/profile_io.hpp"

#include "masslab/error.hpp"

namespace masslab {

std::string_view to_string(Closure c) { return c == Closure::Pole ? "pole" : "cross-cap"; }

nlohmann::json profile_to_json(const WarpedProfile& p) {
  nlohmann::json j;
  j["n"] = p.dimension();
  j["T"] = p.length();
  j["flat_radius"] = p.flat_radius();
  j["closure"] = std::string(to_string(p.closure()));
  j["knots"] = p.knots();
  j["coefficients"] = p.coefficients();
  j["breaks"] = p.breaks();
  if (p.squashed()) j["squash"] = p.squash_coefficients();
  return j;
}

WarpedProfile profile_from_json(const nlohmann::json& j) {
  try {
    const std::string closure = j.value("closure", std::string("pole"));
    require(closure == "pole" || closure == "cross-cap", ErrorKind::Config, "unknown closure '" + closure + "'");
    auto knots = j.at("knots").get<std::vector<double>>();
    require(!knots.empty() && knots.back() == j.at("T").get<double>(), ErrorKind::Config,
            "profile T does not match the last knot");
    std::vector<double> squash;
    if (j.contains("squash")) squash = j.at("squash").get<std::vector<double>>();
    return WarpedProfile(j.at("n").get<int>(), std::move(knots), j.at("coefficients").get<std::vector<double>>(),
                         j.at("flat_radius").get<double>(), j.value("breaks", std::vector<double>{}),
                         closure == "pole" ? Closure::Pole : Closure::CrossCap, std::move(squash));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("profile json: ") + e.what());
  }
}

}  // namespace masslab

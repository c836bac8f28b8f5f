#include "skyroute/flightcost.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace skyroute::flight {

void DroneSpec::validate() const {
    if (!(airspeed > 0.0) || !(battery_capacity > 0.0) || !(max_payload > 0.0) || !(base_power > 0.0) ||
        !(payload_power_coeff > 0.0) || !(min_ground_speed > 0.0)) {
        throw std::invalid_argument("drone spec fields must be strictly positive");
    }
    if (!(min_ground_speed < airspeed)) throw std::invalid_argument("min_ground_speed must be below airspeed");
}

DroneSpec drone_spec_from_json(const nlohmann::json& j) {
    DroneSpec d;
    d.airspeed = j.value("airspeed", d.airspeed);
    d.battery_capacity = j.value("battery_capacity", d.battery_capacity);
    d.max_payload = j.value("max_payload", d.max_payload);
    d.base_power = j.value("base_power", d.base_power);
    d.payload_power_coeff = j.value("payload_power_coeff", d.payload_power_coeff);
    d.min_ground_speed = j.value("min_ground_speed", d.min_ground_speed);
    d.validate();
    return d;
}

nlohmann::json to_json(const DroneSpec& d) {
    return {{"airspeed", d.airspeed},
            {"battery_capacity", d.battery_capacity},
            {"max_payload", d.max_payload},
            {"base_power", d.base_power},
            {"payload_power_coeff", d.payload_power_coeff},
            {"min_ground_speed", d.min_ground_speed}};
}

std::string_view to_string(Infeasibility r) noexcept {
    switch (r) {
        case Infeasibility::none:
            return "none";
        case Infeasibility::crosswind_exceeds_airspeed:
            return "crosswind_exceeds_airspeed";
    }
    return "unknown";
}

std::optional<double> try_ground_speed(double airspeed, double wind_speed, double wind_bearing,
                                       double track_bearing, double min_ground_speed) noexcept {
    if (wind_speed == 0.0) return std::max(airspeed, min_ground_speed);
    const double rel = (wind_bearing - track_bearing) * std::numbers::pi / 180.0;
    const double headwind = wind_speed * std::cos(rel);
    const double crosswind = wind_speed * std::sin(rel);
    if (std::abs(crosswind) >= airspeed) return std::nullopt;
    const double gs = std::sqrt(airspeed * airspeed - crosswind * crosswind) - headwind;
    return std::max(gs, min_ground_speed);
}

double ground_speed(double airspeed, double wind_speed, double wind_bearing, double track_bearing,
                    double min_ground_speed) {
    if (!(airspeed > 0.0)) throw std::invalid_argument("airspeed must be positive");
    auto gs = try_ground_speed(airspeed, wind_speed, wind_bearing, track_bearing, min_ground_speed);
    if (!gs) throw CrosswindExceedsAirspeed("crosswind component exceeds airspeed");
    return *gs;
}

double temperature_derating(double temperature_c) noexcept {
    return 1.0 + 0.01 * std::max(0.0, 15.0 - temperature_c);
}

double cruise_power(const DroneSpec& drone, double payload_kg) noexcept {
    return drone.base_power + drone.payload_power_coeff * payload_kg;
}

EdgeCost edge_cost(double distance, double track, const weather::WeatherSample& wx, const DroneSpec& drone,
                   double payload_kg) {
    if (payload_kg > drone.max_payload) throw std::invalid_argument("payload exceeds max_payload");
    if (distance == 0.0) return {};
    const auto gs =
        try_ground_speed(drone.airspeed, wx.wind_speed, wx.wind_bearing, track, drone.min_ground_speed);
    if (!gs) return {0.0, 0.0, false, Infeasibility::crosswind_exceeds_airspeed};
    const double duration = distance / *gs;
    const double energy = cruise_power(drone, payload_kg) * duration * temperature_derating(wx.temperature) / 3600.0;
    return {duration, energy, true, Infeasibility::none};
}

EdgeCost edge_cost(const skynet::Network& net, int from, int to, const weather::WeatherSample& wx,
                   const DroneSpec& drone, double payload_kg) {
    const auto& a = net.node(from);
    const auto& b = net.node(to);
    return edge_cost(skynet::euclidean(a, b), skynet::track_bearing(a, b), wx, drone, payload_kg);
}

double heuristic_lower_bound(const skynet::Node& node, const skynet::Node& goal, const DroneSpec& drone,
                             double max_wind) noexcept {
    return skynet::euclidean(node, goal) / (drone.airspeed + max_wind);
}

}  // namespace skyroute::flight

#pragma once

#include <optional>
#include <stdexcept>
#include <string_view>

#include <json.hpp>

#include "skyroute/skynet.hpp"
#include "skyroute/weather.hpp"

namespace skyroute::flight {

struct DroneSpec {
    double airspeed = 20.0;            // m/s cruise
    double battery_capacity = 500.0;   // Wh
    double max_payload = 5.0;          // kg
    double base_power = 360.0;         // W at zero payload
    double payload_power_coeff = 40.0; // W/kg
    double min_ground_speed = 1.0;     // m/s floor

    void validate() const;
};

DroneSpec drone_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DroneSpec& d);

enum class Infeasibility { none, crosswind_exceeds_airspeed };

std::string_view to_string(Infeasibility r) noexcept;

struct EdgeCost {
    double duration = 0.0;  // s
    double energy = 0.0;    // Wh
    bool feasible = true;
    Infeasibility reason = Infeasibility::none;
};

class CrosswindExceedsAirspeed : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Wind-triangle ground speed with crab correction. Bearings in degrees;
/// wind_bearing is where the wind blows FROM, so wind_bearing == track is a
/// pure headwind. Returns nullopt when the crosswind component is at least
/// the airspeed (the track cannot be held).
std::optional<double> try_ground_speed(double airspeed, double wind_speed, double wind_bearing,
                                       double track_bearing, double min_ground_speed = 0.0) noexcept;

/// Throwing form of try_ground_speed.
double ground_speed(double airspeed, double wind_speed, double wind_bearing, double track_bearing,
                    double min_ground_speed = 0.0);

/// 1% extra energy per degree C below 15 C; no effect above.
double temperature_derating(double temperature_c) noexcept;

/// Electrical power draw at cruise for the given payload.
double cruise_power(const DroneSpec& drone, double payload_kg) noexcept;

/// Cost of flying `distance` meters on `track` degrees with the weather read
/// at the departure node. Throws std::invalid_argument if payload exceeds the
/// drone's maximum.
EdgeCost edge_cost(double distance, double track, const weather::WeatherSample& wx,
                   const DroneSpec& drone, double payload_kg);

EdgeCost edge_cost(const skynet::Network& net, int from, int to, const weather::WeatherSample& wx,
                   const DroneSpec& drone, double payload_kg);

/// Admissible duration lower bound: straight-line distance at the best
/// possible ground speed (airspeed plus the strongest wind in the series).
double heuristic_lower_bound(const skynet::Node& node, const skynet::Node& goal, const DroneSpec& drone,
                             double max_wind) noexcept;

}  // namespace skyroute::flight

#pragma once

#include <string>
#include <vector>

#include "skyroute/models/model.hpp"

namespace skyroute::models {

struct RolloutResult {
    bool success = false;
    std::string reason;  // empty on success
    std::vector<int> node_sequence;
    double total_duration = 0.0;  // s
    double total_energy = 0.0;    // Wh
    int decisions = 0;
};

struct RolloutQuery {
    int origin = 0;
    int dest = 0;
    double t0 = 0.0;
    double payload = 0.0;
    /// <= 0: 4 x the optimal hop count (at least 1).
    int max_steps = 0;
};

/// Follows argmax predictions from origin, never revisiting a node, costing
/// each hop with the weather snapshot at t0. Failure is a value.
RolloutResult rollout(const Model& model, const NetworkContext& ctx, const weather::WeatherSeries& wx,
                      const flight::DroneSpec& drone, const RolloutQuery& q);

}  // namespace skyroute::models

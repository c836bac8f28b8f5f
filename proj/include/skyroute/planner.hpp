#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "skyroute/flightcost.hpp"
#include "skyroute/skynet.hpp"
#include "skyroute/weather.hpp"

namespace skyroute::planner {

struct Route {
    std::vector<int> node_sequence;
    double total_duration = 0.0;  // s
    double total_energy = 0.0;    // Wh
    std::vector<flight::EdgeCost> segment_costs;
    long expanded_nodes = 0;
    std::int64_t plan_time_ns = 0;

    int hops() const noexcept { return static_cast<int>(segment_costs.size()); }
};

class NoRoute : public std::runtime_error {
public:
    NoRoute(int origin, int dest)
        : std::runtime_error("no feasible route from " + std::to_string(origin) + " to " + std::to_string(dest)) {}
};

/// Cost of traversing the edge from -> to. Infeasible costs are skipped.
using CostFn = std::function<flight::EdgeCost(int from, int to)>;
/// Remaining-cost estimate from a node to the destination (seconds).
using Heuristic = std::function<double(int node)>;

/// Minimum-duration route. Ties break on fewer hops, then on the lower
/// predecessor id. Throws NoRoute.
Route dijkstra(const skynet::Network& net, const CostFn& cost, int origin, int dest);

/// A* with the same tie-breaking. The heuristic must be admissible and
/// consistent for the result to be optimal.
Route astar(const skynet::Network& net, const CostFn& cost, const Heuristic& heuristic, int origin, int dest);

/// Edge costs with every edge's weather read at its departure node at a single
/// frozen time: one weather snapshot per plan.
class SnapshotCost {
public:
    SnapshotCost(const skynet::Network& net, const weather::WeatherSeries& wx, const flight::DroneSpec& drone,
                 double payload_kg, double t);

    flight::EdgeCost operator()(int from, int to) const;
    const weather::WeatherSample& weather_at(int node) const { return wx_.snapshot_held(node, t_); }
    double time() const noexcept { return t_; }

private:
    const skynet::Network& net_;
    const weather::WeatherSeries& wx_;
    flight::DroneSpec drone_;
    double payload_;
    double t_;
};

/// Admissible heuristic bound to one goal.
class DurationHeuristic {
public:
    DurationHeuristic(const skynet::Network& net, const flight::DroneSpec& drone, double max_wind, int goal);
    double operator()(int node) const;

private:
    const skynet::Network& net_;
    flight::DroneSpec drone_;
    double max_wind_;
    int goal_;
};

/// Weather-costed A* at time t, the configuration used to label the dataset.
Route plan_route(const skynet::Network& net, const weather::WeatherSeries& wx, const flight::DroneSpec& drone,
                 double payload_kg, double t, int origin, int dest);

/// Checks adjacency, endpoints and totals; returns an empty string when the
/// route is well-formed, otherwise a description of the first violation.
std::string check_route(const skynet::Network& net, const Route& route, int origin, int dest);

nlohmann::json to_json(const Route& r);

}  // namespace skyroute::planner

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "skyroute/fleetsim.hpp"
#include "skyroute/flightcost.hpp"
#include "skyroute/skynet.hpp"
#include "skyroute/weather.hpp"

namespace skyroute::models {

class UnknownNode : public std::invalid_argument {
public:
    UnknownNode(int request_id, int node)
        : std::invalid_argument("request " + std::to_string(request_id) + " references unknown node " +
                                std::to_string(node)),
          node_(node) {}
    int node() const noexcept { return node_; }

private:
    int node_;
};

/// Per-network tables shared by every sample: normalized coordinates and
/// static (distance-weighted) shortest-path lengths between all node pairs.
struct NetworkContext {
    const skynet::Network* net = nullptr;
    double min_x = 0.0, min_y = 0.0;
    double scale = 1.0;              // largest coordinate extent, m
    std::vector<double> static_dist; // node_count^2, m

    explicit NetworkContext(const skynet::Network& network);

    int node_count() const noexcept { return net->node_count(); }
    double norm_x(int v) const { return (net->node(v).x - min_x) / scale; }
    double norm_y(int v) const { return (net->node(v).y - min_y) / scale; }
    double shortest(int a, int b) const {
        return static_dist[static_cast<std::size_t>(a) * static_cast<std::size_t>(node_count()) +
                           static_cast<std::size_t>(b)];
    }
};

// Token layout: token 0 is the current node, token 1 the destination, then one
// token per neighbor of the current node in ascending id order.
inline constexpr int kNodeFeatures = 11;
inline constexpr int kWeatherFeatures = 9;
inline constexpr int kContextFeatures = 8;
inline constexpr int kSeverityChannels = 4;

/// One routing decision: at current_node, heading for end_node, which
/// neighbor comes next.
struct Sample {
    int request_id = -1;
    int start_node = 0;
    int end_node = 0;
    int current_node = 0;
    double payload = 0.0;         // kg
    double total_distance = 0.0;  // m
    double departure_time = 0.0;  // s, the plan's weather snapshot time
    int label = -1;               // next node id, -1 when unknown
    int label_index = -1;         // position of label in candidates()

    std::vector<int> tokens;             // node ids, 2 + candidate count
    std::vector<double> node_features;   // tokens x kNodeFeatures
    std::vector<double> weather;         // tokens x kWeatherFeatures, empty if weather-blind
    std::vector<double> severity;        // candidates x kSeverityChannels, empty if weather-blind
    std::vector<double> context;         // kContextFeatures

    int candidate_count() const noexcept { return static_cast<int>(tokens.size()) - 2; }
    std::span<const int> candidates() const { return std::span<const int>(tokens).subspan(2); }
    int candidate_index(int node) const;
};

struct SampleQuery {
    int request_id = -1;
    int start = 0;
    int end = 0;
    int current = 0;
    double payload = 0.0;
    double total_distance = 0.0;
    double t = 0.0;
    int label = -1;
};

/// Builds the features of one decision; weather is read at q.t (held past the
/// horizon). Throws UnknownNode, or std::invalid_argument if the current node
/// has no neighbors or the label is not one of them.
Sample make_sample(const NetworkContext& ctx, const weather::WeatherSeries& wx, const flight::DroneSpec& drone,
                   const SampleQuery& q, bool weather_aware = true);

/// One sample per route segment: current = from_node, label = to_node.
/// Records without a departure_time fall back to t = 0.
std::vector<Sample> encode_dataset(const std::vector<fleet::RouteRecord>& records, const NetworkContext& ctx,
                                   const weather::WeatherSeries& wx, const flight::DroneSpec& drone,
                                   bool weather_aware = true);

struct Split {
    std::vector<fleet::RouteRecord> train, val, test;
};

/// Partitions records by request id (whole routes stay together) after a
/// seeded shuffle.
Split split_records(const std::vector<fleet::RouteRecord>& records, double train_frac, double val_frac,
                    std::uint64_t seed);

}  // namespace skyroute::models

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace skyroute::skynet {

struct Node {
    int id = 0;
    double x = 0.0;  // meters, east
    double y = 0.0;  // meters, north
};

struct Edge {
    int u = 0;
    int v = 0;
    double distance = 0.0;
};

struct Neighbor {
    int node = 0;
    int edge = 0;  // index into Network::edges()
};

struct NetConfig {
    int node_count = 50;
    double width_m = 10000.0;
    double height_m = 10000.0;
    double min_separation_m = 500.0;
    int max_degree = 4;
    int extra_edges = 25;
    double max_extra_edge_m = 3000.0;
    std::uint64_t seed = 7;

    /// Throws std::invalid_argument on a malformed config.
    void validate() const;
};

class PlacementInfeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double euclidean(const Node& a, const Node& b) noexcept;

/// Compass bearing of the track a -> b in degrees [0, 360); 0 = north (+y),
/// 90 = east (+x).
double track_bearing(const Node& a, const Node& b) noexcept;

/// Undirected simple graph over planar nodes.
class Network {
public:
    Network() = default;
    explicit Network(std::vector<Node> nodes);

    /// Adds the undirected edge {u, v}; distance is the Euclidean length.
    /// Throws std::invalid_argument on self-loops, duplicates or bad ids.
    int add_edge(int u, int v);

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    std::span<const Neighbor> neighbors(int id) const {
        return adjacency_.at(static_cast<std::size_t>(id));
    }
    int node_count() const noexcept { return static_cast<int>(nodes_.size()); }
    int edge_count() const noexcept { return static_cast<int>(edges_.size()); }
    int degree(int id) const { return static_cast<int>(neighbors(id).size()); }
    bool has_edge(int u, int v) const;
    bool contains(int id) const noexcept { return id >= 0 && id < node_count(); }
    bool connected() const;

    nlohmann::json to_json() const;
    static Network from_json(const nlohmann::json& j);

private:
    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::vector<std::vector<Neighbor>> adjacency_;
};

/// Rejection-samples node_count points with pairwise separation >=
/// min_separation_m, at most 10'000 * node_count attempts.
std::vector<Node> sample_nodes(const NetConfig& cfg);

struct MstResult {
    std::vector<Edge> edges;
    int max_degree_used = 0;
    std::vector<std::string> warnings;
};

/// Kruskal in ascending length order, skipping edges that would exceed the
/// degree cap. If the cap leaves the forest disconnected the cap is raised
/// by one and the construction retried; each relaxation adds a warning.
/// This is a heuristic: the exact degree-constrained MST is NP-hard.
MstResult build_mst(std::span<const Node> nodes, int max_degree);

struct AugmentResult {
    Network network;
    int requested = 0;
    int added = 0;
    int eligible = 0;
};

/// Adds up to cfg.extra_edges edges between non-adjacent pairs no longer than
/// cfg.max_extra_edge_m, drawn uniformly without replacement. The degree cap
/// is not applied here.
AugmentResult add_random_edges(const Network& net, const NetConfig& cfg);

struct GeneratedNetwork {
    Network network;
    MstResult mst;
    int extra_added = 0;
};

/// Full pipeline: sample_nodes -> build_mst -> add_random_edges.
GeneratedNetwork generate_network(const NetConfig& cfg);

NetConfig net_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NetConfig& cfg);

void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace skyroute::skynet

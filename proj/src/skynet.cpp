#include "skyroute/skynet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <queue>
#include <sstream>

#include "skyroute/rng.hpp"

namespace skyroute::skynet {

void NetConfig::validate() const {
    if (node_count < 1) throw std::invalid_argument("node_count must be >= 1");
    if (!(width_m > 0.0) || !(height_m > 0.0)) throw std::invalid_argument("bbox must be positive");
    if (!(min_separation_m >= 0.0)) throw std::invalid_argument("min_separation_m must be >= 0");
    if (max_degree < 2) throw std::invalid_argument("max_degree must be >= 2");
    if (extra_edges < 0) throw std::invalid_argument("extra_edges must be >= 0");
    if (!(max_extra_edge_m >= 0.0)) throw std::invalid_argument("max_extra_edge_m must be >= 0");
}

double euclidean(const Node& a, const Node& b) noexcept {
    return std::hypot(b.x - a.x, b.y - a.y);
}

double track_bearing(const Node& a, const Node& b) noexcept {
    double deg = std::atan2(b.x - a.x, b.y - a.y) * 180.0 / std::numbers::pi;
    if (deg < 0.0) deg += 360.0;
    if (deg >= 360.0) deg -= 360.0;
    return deg;
}

Network::Network(std::vector<Node> nodes) : nodes_(std::move(nodes)), adjacency_(nodes_.size()) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].id != static_cast<int>(i)) {
            throw std::invalid_argument("node ids must be dense 0..N-1 in order");
        }
    }
}

int Network::add_edge(int u, int v) {
    if (!contains(u) || !contains(v)) throw std::invalid_argument("edge references unknown node");
    if (u == v) throw std::invalid_argument("self-loop");
    if (has_edge(u, v)) throw std::invalid_argument("duplicate edge");
    const double d = euclidean(nodes_[u], nodes_[v]);
    if (!(d > 0.0)) throw std::invalid_argument("coincident nodes");
    const int id = static_cast<int>(edges_.size());
    edges_.push_back({std::min(u, v), std::max(u, v), d});
    adjacency_[u].push_back({v, id});
    adjacency_[v].push_back({u, id});
    // Sorted neighbor lists keep iteration order independent of insertion.
    auto by_node = [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; };
    std::sort(adjacency_[u].begin(), adjacency_[u].end(), by_node);
    std::sort(adjacency_[v].begin(), adjacency_[v].end(), by_node);
    return id;
}

bool Network::has_edge(int u, int v) const {
    if (!contains(u) || !contains(v)) return false;
    const auto& a = adjacency_[u];
    return std::any_of(a.begin(), a.end(), [v](const Neighbor& n) { return n.node == v; });
}

bool Network::connected() const {
    if (nodes_.empty()) return true;
    std::vector<char> seen(nodes_.size(), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    std::size_t count = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (const auto& nb : adjacency_[u]) {
            if (!seen[nb.node]) {
                seen[nb.node] = 1;
                ++count;
                q.push(nb.node);
            }
        }
    }
    return count == nodes_.size();
}

nlohmann::json Network::to_json() const {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : nodes_) j["nodes"].push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}});
    j["edges"] = nlohmann::json::array();
    for (const auto& e : edges_) j["edges"].push_back({{"u", e.u}, {"v", e.v}, {"distance", e.distance}});
    return j;
}

Network Network::from_json(const nlohmann::json& j) {
    std::vector<Node> nodes;
    for (const auto& n : j.at("nodes")) {
        nodes.push_back({n.at("id").get<int>(), n.at("x").get<double>(), n.at("y").get<double>()});
    }
    std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
    Network net(std::move(nodes));
    for (const auto& e : j.at("edges")) net.add_edge(e.at("u").get<int>(), e.at("v").get<int>());
    return net;
}

std::vector<Node> sample_nodes(const NetConfig& cfg) {
    cfg.validate();
    const double s = cfg.min_separation_m;
    if (cfg.node_count >= 2) {
        const double diagonal = std::hypot(cfg.width_m, cfg.height_m);
        if (s > diagonal) {
            throw PlacementInfeasible("min_separation_m exceeds the bbox diagonal");
        }
        // Hexagonal packing bound on disks of radius s/2 inside the padded box.
        if (s > 0.0) {
            const double padded = (cfg.width_m + s) * (cfg.height_m + s);
            const double capacity = 0.9069 * padded / (std::numbers::pi * s * s / 4.0);
            if (cfg.node_count > capacity) {
                throw PlacementInfeasible("node_count cannot be packed at min_separation_m");
            }
        }
    }

    Rng rng(derive_seed(cfg.seed, stream::kPlacement));
    std::vector<Node> nodes;
    nodes.reserve(static_cast<std::size_t>(cfg.node_count));
    const long long max_attempts = 10'000LL * cfg.node_count;
    long long attempts = 0;
    while (static_cast<int>(nodes.size()) < cfg.node_count) {
        if (attempts++ >= max_attempts) {
            std::ostringstream msg;
            msg << "placed " << nodes.size() << " of " << cfg.node_count << " nodes after "
                << max_attempts << " attempts";
            throw PlacementInfeasible(msg.str());
        }
        Node cand{static_cast<int>(nodes.size()), rng.uniform(0.0, cfg.width_m),
                  rng.uniform(0.0, cfg.height_m)};
        const bool ok = std::all_of(nodes.begin(), nodes.end(),
                                    [&](const Node& n) { return euclidean(n, cand) >= s; });
        if (ok) nodes.push_back(cand);
    }
    return nodes;
}

namespace {

struct DisjointSets {
    std::vector<int> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[std::max(a, b)] = std::min(a, b);
        return true;
    }
};

std::vector<Edge> sorted_candidate_edges(std::span<const Node> nodes) {
    std::vector<Edge> all;
    all.reserve(nodes.size() * (nodes.size() - 1) / 2);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t k = i + 1; k < nodes.size(); ++k) {
            all.push_back({static_cast<int>(i), static_cast<int>(k), euclidean(nodes[i], nodes[k])});
        }
    }
    std::sort(all.begin(), all.end(), [](const Edge& a, const Edge& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        if (a.u != b.u) return a.u < b.u;
        return a.v < b.v;
    });
    return all;
}

}  // namespace

MstResult build_mst(std::span<const Node> nodes, int max_degree) {
    if (nodes.empty()) throw std::invalid_argument("build_mst needs at least one node");
    if (max_degree < 1) throw std::invalid_argument("max_degree must be >= 1");
    MstResult result;
    result.max_degree_used = max_degree;
    if (nodes.size() == 1) return result;

    const auto candidates = sorted_candidate_edges(nodes);
    const std::size_t n = nodes.size();
    for (int cap = max_degree;; ++cap) {
        DisjointSets sets(n);
        std::vector<int> degree(n, 0);
        std::vector<Edge> tree;
        for (const auto& e : candidates) {
            if (degree[e.u] >= cap || degree[e.v] >= cap) continue;
            if (!sets.unite(e.u, e.v)) continue;
            ++degree[e.u];
            ++degree[e.v];
            tree.push_back(e);
            if (tree.size() == n - 1) break;
        }
        if (tree.size() == n - 1) {
            result.edges = std::move(tree);
            result.max_degree_used = cap;
            return result;
        }
        result.warnings.push_back("degree cap " + std::to_string(cap) +
                                  " disconnected the tree; retrying with " + std::to_string(cap + 1));
    }
}

AugmentResult add_random_edges(const Network& net, const NetConfig& cfg) {
    AugmentResult out{net, cfg.extra_edges, 0, 0};
    if (cfg.extra_edges <= 0) return out;

    std::vector<std::pair<int, int>> eligible;
    const auto& nodes = net.nodes();
    for (int u = 0; u < net.node_count(); ++u) {
        for (int v = u + 1; v < net.node_count(); ++v) {
            if (net.has_edge(u, v)) continue;
            if (euclidean(nodes[u], nodes[v]) <= cfg.max_extra_edge_m) eligible.emplace_back(u, v);
        }
    }
    out.eligible = static_cast<int>(eligible.size());
    const std::size_t take = std::min<std::size_t>(eligible.size(), static_cast<std::size_t>(cfg.extra_edges));

    // Partial Fisher-Yates: the first `take` slots become a uniform sample.
    Rng rng(derive_seed(cfg.seed, stream::kAugment));
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(eligible.size() - i));
        std::swap(eligible[i], eligible[j]);
    }
    std::sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(take));
    for (std::size_t i = 0; i < take; ++i) out.network.add_edge(eligible[i].first, eligible[i].second);
    out.added = static_cast<int>(take);
    return out;
}

GeneratedNetwork generate_network(const NetConfig& cfg) {
    cfg.validate();
    GeneratedNetwork out;
    auto nodes = sample_nodes(cfg);
    out.mst = build_mst(nodes, cfg.max_degree);
    Network tree(std::move(nodes));
    for (const auto& e : out.mst.edges) tree.add_edge(e.u, e.v);
    auto aug = add_random_edges(tree, cfg);
    out.network = std::move(aug.network);
    out.extra_added = aug.added;
    return out;
}

NetConfig net_config_from_json(const nlohmann::json& j) {
    NetConfig c;
    c.node_count = j.value("node_count", c.node_count);
    if (j.contains("bbox")) {
        c.width_m = j["bbox"].at(0).get<double>();
        c.height_m = j["bbox"].at(1).get<double>();
    }
    c.min_separation_m = j.value("min_separation_m", c.min_separation_m);
    c.max_degree = j.value("max_degree", c.max_degree);
    c.extra_edges = j.value("extra_edges", c.extra_edges);
    c.max_extra_edge_m = j.value("max_extra_edge_m", c.max_extra_edge_m);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

nlohmann::json to_json(const NetConfig& c) {
    return {{"node_count", c.node_count},
            {"bbox", {c.width_m, c.height_m}},
            {"min_separation_m", c.min_separation_m},
            {"max_degree", c.max_degree},
            {"extra_edges", c.extra_edges},
            {"max_extra_edge_m", c.max_extra_edge_m},
            {"seed", c.seed}};
}

void save_network(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << net.to_json().dump(1) << '\n';
}

Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return Network::from_json(nlohmann::json::parse(in));
}

}  // namespace skyroute::skynet

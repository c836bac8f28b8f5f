#pragma once

// Test-only helpers: random instances and independent oracles.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "skyroute/planner.hpp"
#include "skyroute/rng.hpp"
#include "skyroute/skynet.hpp"
#include "skyroute/weather.hpp"

namespace skyroute::testing {

struct Instance {
    skynet::Network net;
    weather::WeatherSeries wx;
    double t = 0.0;
    double payload = 0.0;
    int origin = 0;
    int dest = 0;
};

inline skynet::NetConfig instance_config(int nodes, std::uint64_t seed) {
    skynet::NetConfig cfg;
    cfg.node_count = nodes;
    cfg.width_m = 6000.0;
    cfg.height_m = 6000.0;
    cfg.min_separation_m = 400.0;
    cfg.max_degree = 3;
    cfg.extra_edges = nodes / 2;
    cfg.max_extra_edge_m = 2500.0;
    cfg.seed = seed;
    return cfg;
}

/// Weather-costed random instance with a distinct origin/destination.
inline Instance random_instance(int nodes, std::uint64_t seed) {
    Instance in;
    in.net = skynet::generate_network(instance_config(nodes, seed)).network;
    in.wx = weather::synth_weather(in.net, 6 * 3600.0, 1800.0, seed ^ 0x5eed);
    Rng rng(derive_seed(seed, 999));
    in.t = rng.uniform(0.0, in.wx.horizon_s());
    in.payload = rng.uniform(0.0, 5.0);
    in.origin = static_cast<int>(rng.below(static_cast<std::uint64_t>(nodes)));
    in.dest = static_cast<int>(rng.below(static_cast<std::uint64_t>(nodes - 1)));
    if (in.dest >= in.origin) ++in.dest;
    return in;
}

/// Minimum total cost over every simple path, by exhaustive DFS.
inline double brute_force_min_cost(const skynet::Network& net, const planner::CostFn& cost, int origin, int dest) {
    double best = std::numeric_limits<double>::infinity();
    std::vector<char> on_path(static_cast<std::size_t>(net.node_count()), 0);
    std::function<void(int, double)> dfs = [&](int u, double g) {
        if (u == dest) {
            best = std::min(best, g);
            return;
        }
        on_path[u] = 1;
        for (const auto& nb : net.neighbors(u)) {
            if (on_path[nb.node]) continue;
            const auto c = cost(u, nb.node);
            if (c.feasible) dfs(nb.node, g + c.duration);
        }
        on_path[u] = 0;
    };
    dfs(origin, 0.0);
    return best;
}

inline bool rel_close(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace skyroute::testing

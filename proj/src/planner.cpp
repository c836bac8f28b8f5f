#include "skyroute/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

namespace skyroute::planner {

namespace {

struct Label {
    double g = std::numeric_limits<double>::infinity();
    int hops = std::numeric_limits<int>::max();
    int pred = -1;
    flight::EdgeCost via;
};

struct QueueEntry {
    double f;
    double g;
    int hops;
    int node;
};

// Min-heap order on (f, hops, node).
struct Later {
    bool operator()(const QueueEntry& a, const QueueEntry& b) const {
        if (a.f != b.f) return a.f > b.f;
        if (a.hops != b.hops) return a.hops > b.hops;
        return a.node > b.node;
    }
};

bool improves(double g, int hops, int pred, const Label& cur) {
    if (g != cur.g) return g < cur.g;
    if (hops != cur.hops) return hops < cur.hops;
    return pred < cur.pred;
}

template <class H>
Route search(const skynet::Network& net, const CostFn& cost, H&& heuristic, int origin, int dest) {
    const auto start = std::chrono::steady_clock::now();
    if (!net.contains(origin) || !net.contains(dest)) throw std::out_of_range("origin/dest not in network");

    const auto n = static_cast<std::size_t>(net.node_count());
    std::vector<Label> labels(n);
    std::vector<char> closed(n, 0);
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, Later> open;

    labels[origin].g = 0.0;
    labels[origin].hops = 0;
    open.push({heuristic(origin), 0.0, 0, origin});
    long expanded = 0;
    bool found = false;

    while (!open.empty()) {
        const QueueEntry top = open.top();
        open.pop();
        const int u = top.node;
        if (closed[u]) continue;
        if (top.g != labels[u].g || top.hops != labels[u].hops) continue;  // stale
        closed[u] = 1;
        ++expanded;
        if (u == dest) {
            found = true;
            break;
        }
        for (const auto& nb : net.neighbors(u)) {
            const int v = nb.node;
            if (closed[v]) continue;
            const flight::EdgeCost c = cost(u, v);
            if (!c.feasible) continue;
            const double g = labels[u].g + c.duration;
            const int hops = labels[u].hops + 1;
            if (improves(g, hops, u, labels[v])) {
                labels[v] = {g, hops, u, c};
                open.push({g + heuristic(v), g, hops, v});
            }
        }
    }
    if (!found) throw NoRoute(origin, dest);

    Route route;
    for (int v = dest; v != -1; v = labels[v].pred) route.node_sequence.push_back(v);
    std::reverse(route.node_sequence.begin(), route.node_sequence.end());
    for (std::size_t i = 1; i < route.node_sequence.size(); ++i) {
        const auto& c = labels[route.node_sequence[i]].via;
        route.segment_costs.push_back(c);
        route.total_duration += c.duration;
        route.total_energy += c.energy;
    }
    route.expanded_nodes = expanded;
    route.plan_time_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
    return route;
}

}  // namespace

Route dijkstra(const skynet::Network& net, const CostFn& cost, int origin, int dest) {
    return search(net, cost, [](int) { return 0.0; }, origin, dest);
}

Route astar(const skynet::Network& net, const CostFn& cost, const Heuristic& heuristic, int origin, int dest) {
    return search(net, cost, heuristic, origin, dest);
}

SnapshotCost::SnapshotCost(const skynet::Network& net, const weather::WeatherSeries& wx,
                           const flight::DroneSpec& drone, double payload_kg, double t)
    : net_(net), wx_(wx), drone_(drone), payload_(payload_kg), t_(t) {}

flight::EdgeCost SnapshotCost::operator()(int from, int to) const {
    return flight::edge_cost(net_, from, to, wx_.snapshot_held(from, t_), drone_, payload_);
}

DurationHeuristic::DurationHeuristic(const skynet::Network& net, const flight::DroneSpec& drone, double max_wind,
                                     int goal)
    : net_(net), drone_(drone), max_wind_(max_wind), goal_(goal) {}

double DurationHeuristic::operator()(int node) const {
    return flight::heuristic_lower_bound(net_.node(node), net_.node(goal_), drone_, max_wind_);
}

Route plan_route(const skynet::Network& net, const weather::WeatherSeries& wx, const flight::DroneSpec& drone,
                 double payload_kg, double t, int origin, int dest) {
    const SnapshotCost cost(net, wx, drone, payload_kg, t);
    const DurationHeuristic h(net, drone, wx.max_wind_speed(), dest);
    return astar(net, std::cref(cost), std::cref(h), origin, dest);
}

std::string check_route(const skynet::Network& net, const Route& route, int origin, int dest) {
    std::ostringstream err;
    const auto& seq = route.node_sequence;
    if (seq.empty()) return "empty node sequence";
    if (seq.front() != origin) err << "route starts at " << seq.front() << " not " << origin;
    else if (seq.back() != dest) err << "route ends at " << seq.back() << " not " << dest;
    else if (route.segment_costs.size() + 1 != seq.size()) err << "segment count mismatch";
    if (!err.str().empty()) return err.str();
    double dur = 0.0, energy = 0.0;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
        if (!net.has_edge(seq[i], seq[i + 1])) {
            err << "nodes " << seq[i] << " and " << seq[i + 1] << " are not adjacent";
            return err.str();
        }
        dur += route.segment_costs[i].duration;
        energy += route.segment_costs[i].energy;
    }
    const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
    if (!close(dur, route.total_duration)) return "total_duration differs from segment sum";
    if (!close(energy, route.total_energy)) return "total_energy differs from segment sum";
    return {};
}

nlohmann::json to_json(const Route& r) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& c : r.segment_costs) {
        segs.push_back({{"duration", c.duration}, {"energy", c.energy}, {"feasible", c.feasible}});
    }
    return {{"node_sequence", r.node_sequence},   {"total_duration", r.total_duration},
            {"total_energy", r.total_energy},     {"segment_costs", segs},
            {"expanded_nodes", r.expanded_nodes}, {"plan_time_ns", r.plan_time_ns}};
}

}  // namespace skyroute::planner

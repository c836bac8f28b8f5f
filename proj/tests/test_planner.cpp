#include <doctest.h>

#include <map>

#include "skyroute/planner.hpp"
#include "support.hpp"

using namespace skyroute;
using namespace skyroute::planner;

namespace {

// Line-free triangle A(0)-B(1)-C(2) with explicit durations.
struct Triangle {
    skynet::Network net{{{0, 0, 0}, {1, 1, 1}, {2, 2, 0}}};
    std::map<std::pair<int, int>, double> dur{{{0, 1}, 1.0}, {{1, 2}, 1.0}, {{0, 2}, 3.0}};
    Triangle() {
        net.add_edge(0, 1);
        net.add_edge(1, 2);
        net.add_edge(0, 2);
    }
    CostFn cost() const {
        return [this](int a, int b) {
            return flight::EdgeCost{dur.at({std::min(a, b), std::max(a, b)}), 1.0, true};
        };
    }
};

}  // namespace

TEST_CASE("dijkstra: origin equals destination") {
    Triangle tri;
    const auto r = dijkstra(tri.net, tri.cost(), 1, 1);
    CHECK(r.node_sequence == std::vector<int>{1});
    CHECK(r.total_duration == 0.0);
    CHECK(r.segment_costs.empty());
}

TEST_CASE("dijkstra: triangle prefers the two-hop path") {
    Triangle tri;
    const auto r = dijkstra(tri.net, tri.cost(), 0, 2);
    CHECK(r.node_sequence == std::vector<int>{0, 1, 2});
    CHECK(r.total_duration == 2.0);
    CHECK(r.total_energy == 2.0);
    CHECK(check_route(tri.net, r, 0, 2).empty());
}

TEST_CASE("dijkstra: ties break on hops, then on lower predecessor") {
    Triangle tri;
    tri.dur[{0, 2}] = 2.0;  // direct path ties the two-hop path
    CHECK(dijkstra(tri.net, tri.cost(), 0, 2).node_sequence == std::vector<int>{0, 2});

    // Square 0-1-3 and 0-2-3 with equal costs: predecessor 1 < 2 wins.
    skynet::Network sq({{0, 0, 0}, {1, 1, 1}, {2, 1, -1}, {3, 2, 0}});
    sq.add_edge(0, 1);
    sq.add_edge(0, 2);
    sq.add_edge(1, 3);
    sq.add_edge(2, 3);
    const CostFn unit = [](int, int) { return flight::EdgeCost{1.0, 1.0, true}; };
    CHECK(dijkstra(sq, unit, 0, 3).node_sequence == std::vector<int>{0, 1, 3});
    CHECK(astar(sq, unit, [](int) { return 0.0; }, 0, 3).node_sequence == std::vector<int>{0, 1, 3});
}

TEST_CASE("dijkstra: unreachable destination raises NoRoute") {
    Triangle tri;
    const CostFn blocked = [](int a, int b) {
        if (a == 2 || b == 2) return flight::EdgeCost{0, 0, false, flight::Infeasibility::crosswind_exceeds_airspeed};
        return flight::EdgeCost{1.0, 1.0, true};
    };
    CHECK_THROWS_AS(dijkstra(tri.net, blocked, 0, 2), NoRoute);
    CHECK_THROWS_AS(astar(tri.net, blocked, [](int) { return 0.0; }, 0, 2), NoRoute);
}

TEST_CASE("astar: zero heuristic reproduces dijkstra exactly") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto in = testing::random_instance(25, seed);
        const SnapshotCost cost(in.net, in.wx, flight::DroneSpec{}, in.payload, in.t);
        const auto d = dijkstra(in.net, std::cref(cost), in.origin, in.dest);
        const auto a = astar(in.net, std::cref(cost), [](int) { return 0.0; }, in.origin, in.dest);
        CHECK(a.node_sequence == d.node_sequence);
        CHECK(a.total_duration == d.total_duration);
        CHECK(a.expanded_nodes == d.expanded_nodes);
    }
}

TEST_CASE("astar: origin equals destination") {
    const auto in = testing::random_instance(10, 1);
    const auto r = plan_route(in.net, in.wx, flight::DroneSpec{}, 1.0, 0.0, 3, 3);
    CHECK(r.node_sequence == std::vector<int>{3});
    CHECK(r.total_duration == 0.0);
}

TEST_CASE("dijkstra matches exhaustive simple-path enumeration on 15-node networks") {
    for (std::uint64_t seed = 100; seed < 300; ++seed) {
        const auto in = testing::random_instance(15, seed);
        const SnapshotCost cost(in.net, in.wx, flight::DroneSpec{}, in.payload, in.t);
        const auto d = dijkstra(in.net, std::cref(cost), in.origin, in.dest);
        const double brute = testing::brute_force_min_cost(in.net, std::cref(cost), in.origin, in.dest);
        CHECK(testing::rel_close(d.total_duration, brute, 1e-12));
        CHECK(check_route(in.net, d, in.origin, in.dest).empty());
    }
}

TEST_CASE("astar with the admissible heuristic is optimal on 30-node instances") {
    const flight::DroneSpec drone;
    for (std::uint64_t seed = 1000; seed < 1200; ++seed) {
        const auto in = testing::random_instance(30, seed);
        const SnapshotCost cost(in.net, in.wx, drone, in.payload, in.t);
        const DurationHeuristic h(in.net, drone, in.wx.max_wind_speed(), in.dest);
        const auto d = dijkstra(in.net, std::cref(cost), in.origin, in.dest);
        const auto a = astar(in.net, std::cref(cost), std::cref(h), in.origin, in.dest);
        CHECK(testing::rel_close(a.total_duration, d.total_duration, 1e-9));
        CHECK(check_route(in.net, a, in.origin, in.dest).empty());

        // The heuristic never overestimates the true remaining duration.
        for (int v = 0; v < in.net.node_count(); ++v) {
            if (v == in.dest) continue;
            const auto rest = dijkstra(in.net, std::cref(cost), v, in.dest);
            CHECK(h(v) <= rest.total_duration * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("planning is deterministic") {
    const auto in = testing::random_instance(30, 77);
    const auto a = plan_route(in.net, in.wx, flight::DroneSpec{}, in.payload, in.t, in.origin, in.dest);
    const auto b = plan_route(in.net, in.wx, flight::DroneSpec{}, in.payload, in.t, in.origin, in.dest);
    CHECK(a.node_sequence == b.node_sequence);
    CHECK(a.total_duration == b.total_duration);
    CHECK(a.total_energy == b.total_energy);
}

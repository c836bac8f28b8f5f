#include "skyroute/models/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace skyroute::models {

RolloutResult rollout(const Model& model, const NetworkContext& ctx, const weather::WeatherSeries& wx,
                      const flight::DroneSpec& drone, const RolloutQuery& q) {
    const auto& net = *ctx.net;
    RolloutResult res;
    if (!net.contains(q.origin) || !net.contains(q.dest)) {
        res.reason = "unknown origin or destination";
        return res;
    }
    res.node_sequence.push_back(q.origin);
    if (q.origin == q.dest) {
        res.success = true;
        return res;
    }
    const double to_go = ctx.shortest(q.origin, q.dest);
    if (!std::isfinite(to_go)) {
        res.reason = "destination unreachable";
        return res;
    }

    int max_steps = q.max_steps;
    if (max_steps <= 0) {
        try {
            const auto opt = planner::plan_route(net, wx, drone, q.payload, q.t0, q.origin, q.dest);
            max_steps = std::max(1, 4 * opt.hops());
        } catch (const planner::NoRoute&) {
            max_steps = 4 * net.node_count();
        }
    }

    const planner::SnapshotCost cost(net, wx, drone, q.payload, q.t0);
    std::unordered_set<int> visited{q.origin};
    SampleQuery sq;
    sq.start = q.origin;
    sq.end = q.dest;
    sq.payload = q.payload;
    sq.total_distance = to_go;
    sq.t = q.t0;
    int current = q.origin;
    while (current != q.dest) {
        if (res.decisions >= max_steps) {
            res.reason = "step limit " + std::to_string(max_steps) + " reached";
            return res;
        }
        sq.current = current;
        const Sample s = make_sample(ctx, wx, drone, sq, true);
        auto p = model.predict_next(s);
        ++res.decisions;
        const auto cand = s.candidates();
        int pick = -1;
        flight::EdgeCost pick_cost;
        double best = -1.0;
        for (std::size_t i = 0; i < cand.size(); ++i) {
            if (visited.count(cand[i])) continue;
            const auto c = cost(current, cand[i]);
            if (!c.feasible) continue;
            if (p[i] > best) {
                best = p[i];
                pick = cand[i];
                pick_cost = c;
            }
        }
        if (pick < 0) {
            res.reason = "dead end at node " + std::to_string(current);
            return res;
        }
        res.total_duration += pick_cost.duration;
        res.total_energy += pick_cost.energy;
        res.node_sequence.push_back(pick);
        visited.insert(pick);
        current = pick;
    }
    res.success = true;
    return res;
}

}  // namespace skyroute::models

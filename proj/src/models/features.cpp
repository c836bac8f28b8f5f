#include "skyroute/models/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "skyroute/rng.hpp"

namespace skyroute::models {

namespace {

void static_shortest_paths(const skynet::Network& net, std::vector<double>& out) {
    const int n = net.node_count();
    const double inf = std::numeric_limits<double>::infinity();
    out.assign(static_cast<std::size_t>(n) * n, inf);
    using Item = std::pair<double, int>;
    for (int src = 0; src < n; ++src) {
        double* dist = out.data() + static_cast<std::size_t>(src) * n;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        dist[src] = 0.0;
        heap.emplace(0.0, src);
        while (!heap.empty()) {
            const auto [d, u] = heap.top();
            heap.pop();
            if (d > dist[u]) continue;
            for (const auto& nb : net.neighbors(u)) {
                const double nd = d + net.edges()[nb.edge].distance;
                if (nd < dist[nb.node]) {
                    dist[nb.node] = nd;
                    heap.emplace(nd, nb.node);
                }
            }
        }
    }
}

double deg_to_rad(double d) { return d * 3.14159265358979323846 / 180.0; }

}  // namespace

NetworkContext::NetworkContext(const skynet::Network& network) : net(&network) {
    if (network.node_count() == 0) throw std::invalid_argument("empty network");
    double max_x = -std::numeric_limits<double>::infinity();
    double max_y = max_x;
    min_x = min_y = std::numeric_limits<double>::infinity();
    for (const auto& nd : network.nodes()) {
        min_x = std::min(min_x, nd.x);
        min_y = std::min(min_y, nd.y);
        max_x = std::max(max_x, nd.x);
        max_y = std::max(max_y, nd.y);
    }
    scale = std::max({max_x - min_x, max_y - min_y, 1.0});
    static_shortest_paths(network, static_dist);
}

int Sample::candidate_index(int node) const {
    const auto c = candidates();
    const auto it = std::lower_bound(c.begin(), c.end(), node);
    if (it == c.end() || *it != node) return -1;
    return static_cast<int>(it - c.begin());
}

Sample make_sample(const NetworkContext& ctx, const weather::WeatherSeries& wx, const flight::DroneSpec& drone,
                   const SampleQuery& q, bool weather_aware) {
    const auto& net = *ctx.net;
    for (int v : {q.start, q.end, q.current}) {
        if (!net.contains(v)) throw UnknownNode(q.request_id, v);
    }
    if (q.label >= 0 && !net.contains(q.label)) throw UnknownNode(q.request_id, q.label);
    const auto nbs = net.neighbors(q.current);
    if (nbs.empty()) throw std::invalid_argument("current node has no neighbors");

    Sample s;
    s.request_id = q.request_id;
    s.start_node = q.start;
    s.end_node = q.end;
    s.current_node = q.current;
    s.payload = q.payload;
    s.total_distance = q.total_distance;
    s.departure_time = q.t;
    s.label = q.label;

    s.tokens.reserve(nbs.size() + 2);
    s.tokens.push_back(q.current);
    s.tokens.push_back(q.end);
    std::vector<double> edge_len;
    for (const auto& nb : nbs) s.tokens.push_back(nb.node);
    std::sort(s.tokens.begin() + 2, s.tokens.end());
    for (auto it = s.tokens.begin() + 2; it != s.tokens.end(); ++it) {
        edge_len.push_back(skynet::euclidean(net.node(q.current), net.node(*it)));
    }
    if (q.label >= 0) {
        s.label_index = s.candidate_index(q.label);
        if (s.label_index < 0) throw std::invalid_argument("label is not a neighbor of the current node");
    }

    const int ntok = static_cast<int>(s.tokens.size());
    const double inv = 1.0 / ctx.scale;
    const auto& dest = net.node(q.end);
    const double here_to_go = ctx.shortest(q.current, q.end);
    s.node_features.assign(static_cast<std::size_t>(ntok) * kNodeFeatures, 0.0);
    for (int i = 0; i < ntok; ++i) {
        const int v = s.tokens[i];
        double* f = s.node_features.data() + static_cast<std::size_t>(i) * kNodeFeatures;
        f[0] = ctx.norm_x(v);
        f[1] = ctx.norm_y(v);
        f[2] = skynet::euclidean(net.node(v), dest) * inv;
        f[3] = ctx.shortest(v, q.end) * inv;
        if (i >= 2) {
            const double len = edge_len[i - 2];
            f[4] = len * inv;
            f[5] = (len + ctx.shortest(v, q.end) - here_to_go) * inv;
            f[8] = 1.0;
            f[9] = v == q.end ? 1.0 : 0.0;
        }
        f[6] = i == 0 ? 1.0 : 0.0;
        f[7] = i == 1 ? 1.0 : 0.0;
        f[10] = net.degree(v) / 8.0;
    }

    s.context = {ctx.norm_x(q.start), ctx.norm_y(q.start), ctx.norm_x(q.end), ctx.norm_y(q.end),
                 ctx.norm_x(q.current), ctx.norm_y(q.current), q.payload / drone.max_payload,
                 q.total_distance * inv};

    if (!weather_aware) return s;

    const auto& here = wx.snapshot_held(q.current, q.t);
    s.weather.assign(static_cast<std::size_t>(ntok) * kWeatherFeatures, 0.0);
    s.severity.assign(static_cast<std::size_t>(ntok - 2) * kSeverityChannels, 0.0);
    for (int i = 0; i < ntok; ++i) {
        const int v = s.tokens[i];
        const auto& w = wx.snapshot_held(v, q.t);
        double* f = s.weather.data() + static_cast<std::size_t>(i) * kWeatherFeatures;
        f[0] = w.wind_speed / weather::limits::kWindMax;
        f[1] = std::sin(deg_to_rad(w.wind_bearing));
        f[2] = std::cos(deg_to_rad(w.wind_bearing));
        f[3] = (w.temperature - 15.0) / 20.0;
        f[4] = w.visibility / weather::limits::kVisibilityMax;
        f[5] = w.cloud_cover / 100.0;
        if (i < 2) continue;

        const double len = edge_len[i - 2];
        const double track = skynet::track_bearing(net.node(q.current), net.node(v));
        const auto cost = flight::edge_cost(len, track, here, drone, q.payload);
        const double speed_ratio = cost.feasible && cost.duration > 0.0 ? len / cost.duration / drone.airspeed : 0.0;
        f[6] = speed_ratio;
        f[7] = here.wind_speed * std::cos(deg_to_rad(here.wind_bearing - track)) / weather::limits::kWindMax;
        f[8] = cost.feasible ? cost.duration * drone.airspeed * inv : 10.0;

        double* sev = s.severity.data() + static_cast<std::size_t>(i - 2) * kSeverityChannels;
        sev[0] = std::clamp(1.0 - speed_ratio, 0.0, 1.0);
        sev[1] = w.wind_speed / weather::limits::kWindMax;
        sev[2] = std::max(0.0, 15.0 - w.temperature) / 20.0;
        sev[3] = 1.0 - w.visibility / weather::limits::kVisibilityMax;
    }
    return s;
}

std::vector<Sample> encode_dataset(const std::vector<fleet::RouteRecord>& records, const NetworkContext& ctx,
                                   const weather::WeatherSeries& wx, const flight::DroneSpec& drone,
                                   bool weather_aware) {
    std::vector<Sample> out;
    for (const auto& r : records) {
        if (r.route_segments.empty()) continue;
        SampleQuery q;
        q.request_id = r.request_id;
        q.start = r.origin();
        q.end = r.destination();
        q.payload = r.payload_kg.value_or(0.0);
        q.total_distance = r.total_distance();
        q.t = r.departure_time.value_or(0.0);
        for (const auto& seg : r.route_segments) {
            q.current = seg.from_node;
            q.label = seg.to_node;
            out.push_back(make_sample(ctx, wx, drone, q, weather_aware));
        }
    }
    return out;
}

Split split_records(const std::vector<fleet::RouteRecord>& records, double train_frac, double val_frac,
                    std::uint64_t seed) {
    if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0) {
        throw std::invalid_argument("split fractions must be positive and sum to at most 1");
    }
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, stream::kSplit));
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    const auto n = records.size();
    const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n))));
    Split s;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = records[order[i]];
        if (i < n_train) {
            s.train.push_back(r);
        } else if (i < n_train + n_val) {
            s.val.push_back(r);
        } else {
            s.test.push_back(r);
        }
    }
    return s;
}

}  // namespace skyroute::models

#include "skyroute/fleetsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "skyroute/rng.hpp"

namespace skyroute::fleet {

std::vector<int> RouteRecord::node_sequence() const {
    std::vector<int> seq;
    if (route_segments.empty()) return seq;
    seq.push_back(route_segments.front().from_node);
    for (const auto& s : route_segments) seq.push_back(s.to_node);
    return seq;
}

double RouteRecord::total_distance() const {
    double d = 0.0;
    for (const auto& s : route_segments) d += s.distance;
    return d;
}

std::vector<Request> generate_requests(const skynet::Network& net, int count, double horizon_s, PayloadRange payload,
                                       double max_payload, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("count must be >= 1");
    if (net.node_count() < 2) throw std::invalid_argument("need at least two nodes for distinct endpoints");
    if (!(horizon_s >= 0.0)) throw std::invalid_argument("horizon must be non-negative");
    if (!(payload.min_kg > 0.0) || payload.max_kg < payload.min_kg) throw std::invalid_argument("bad payload range");
    if (payload.max_kg > max_payload) throw std::invalid_argument("payload range exceeds drone max_payload");

    Rng rng(derive_seed(seed, stream::kRequests));
    const auto n = static_cast<std::uint64_t>(net.node_count());
    std::vector<Request> out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        auto& r = out[i];
        r.origin = static_cast<int>(rng.below(n));
        // Draw from the n-1 other nodes so the pair is distinct without rejection.
        r.destination = static_cast<int>(rng.below(n - 1));
        if (r.destination >= r.origin) ++r.destination;
        r.payload_kg = rng.uniform(payload.min_kg, payload.max_kg);
        r.request_time = rng.uniform(0.0, horizon_s);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Request& a, const Request& b) { return a.request_time < b.request_time; });
    for (int i = 0; i < count; ++i) out[i].request_id = i;
    return out;
}

void validate_request(const Request& r, const skynet::Network& net, const flight::DroneSpec& drone, double horizon_s) {
    if (!net.contains(r.origin) || !net.contains(r.destination)) throw std::invalid_argument("request node unknown");
    if (r.origin == r.destination) throw std::invalid_argument("request origin equals destination");
    if (!(r.payload_kg > 0.0) || r.payload_kg > drone.max_payload) {
        throw std::invalid_argument("request " + std::to_string(r.request_id) + " payload outside (0, max_payload]");
    }
    if (r.request_time < 0.0 || r.request_time > horizon_s) throw std::invalid_argument("request time outside horizon");
}

std::vector<DroneState> make_fleet(const skynet::Network& net, const flight::DroneSpec& drone, const FleetConfig& cfg) {
    if (cfg.drone_count < 1) throw std::invalid_argument("fleet must be non-empty");
    Rng rng(derive_seed(cfg.seed, stream::kFleet));
    std::vector<DroneState> fleet(static_cast<std::size_t>(cfg.drone_count));
    for (int i = 0; i < cfg.drone_count; ++i) {
        fleet[i] = {i, static_cast<int>(rng.below(static_cast<std::uint64_t>(net.node_count()))),
                    drone.battery_capacity, 0.0};
    }
    return fleet;
}

std::size_t NearestEarliestDispatch::choose(const std::vector<DroneState>& fleet, const Request& req,
                                            const skynet::Network& net) const {
    std::size_t best = 0;
    double best_ready = std::numeric_limits<double>::infinity();
    double best_dist = std::numeric_limits<double>::infinity();
    const auto& origin = net.node(req.origin);
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        const double ready = std::max(fleet[i].available_at, req.request_time);
        const double dist = skynet::euclidean(net.node(fleet[i].current_node), origin);
        if (ready < best_ready || (ready == best_ready && dist < best_dist)) {
            best = i;
            best_ready = ready;
            best_dist = dist;
        }
    }
    return best;
}

std::string_view to_string(EventKind k) noexcept {
    switch (k) {
        case EventKind::dispatch:
            return "dispatch";
        case EventKind::recharge:
            return "recharge";
        case EventKind::reposition:
            return "reposition";
        case EventKind::delivery:
            return "delivery";
        case EventKind::failure:
            return "failure";
    }
    return "unknown";
}

namespace {

class Simulator {
public:
    Simulator(const skynet::Network& net, const weather::WeatherSeries& wx, const flight::DroneSpec& drone,
              const FleetConfig& cfg, SimulationResult& out)
        : net_(net), wx_(wx), drone_(drone), cfg_(cfg), out_(out) {}

    void serve(DroneState& d, const Request& req) {
        double t = std::max(d.available_at, req.request_time);
        log(d, req.request_id, t, EventKind::dispatch);
        if (d.battery_remaining < cfg_.recharge_threshold * drone_.battery_capacity) recharge(d, req.request_id, t);

        if (d.current_node != req.origin) {
            auto leg = plan_with_recharge(d, req.request_id, t, d.current_node, req.origin, 0.0);
            if (!leg) return fail(d, req, t, "reposition leg not flyable");
            d.battery_remaining -= leg->total_energy;
            t += leg->total_duration;
            d.current_node = req.origin;
            log(d, req.request_id, t, EventKind::reposition);
        }

        auto plan = plan_with_recharge(d, req.request_id, t, req.origin, req.destination, req.payload_kg);
        if (!plan) return fail(d, req, t, "delivery route exceeds battery capacity or is infeasible");
        const double departure = t;

        RouteRecord rec;
        rec.request_id = req.request_id;
        rec.payload_kg = req.payload_kg;
        rec.departure_time = departure;
        const auto& seq = plan->node_sequence;
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            const auto& wx = wx_.snapshot_held(seq[i], departure);
            const auto& cost = plan->segment_costs[i];
            rec.route_segments.push_back({seq[i], seq[i + 1], wx.wind_speed, wx.wind_bearing, wx.temperature,
                                          skynet::euclidean(net_.node(seq[i]), net_.node(seq[i + 1])),
                                          cost.duration, cost.energy});
            d.battery_remaining -= cost.energy;
        }
        t += plan->total_duration;
        d.current_node = req.destination;
        d.available_at = t;
        log(d, req.request_id, t, EventKind::delivery);
        out_.records.push_back(std::move(rec));
    }

private:
    void log(const DroneState& d, int request_id, double t, EventKind kind) {
        out_.events.push_back({d.drone_id, request_id, t, kind, d.current_node, d.battery_remaining});
    }

    void recharge(DroneState& d, int request_id, double& t) {
        t += cfg_.charge_time_s;
        d.battery_remaining = drone_.battery_capacity;
        ++out_.recharges;
        log(d, request_id, t, EventKind::recharge);
    }

    // Plans at time t; if the route needs more than the remaining charge the
    // drone recharges in place and replans against the later weather.
    std::optional<planner::Route> plan_with_recharge(DroneState& d, int request_id, double& t, int from, int to,
                                                     double payload) {
        auto attempt = [&]() -> std::optional<planner::Route> {
            try {
                return planner::plan_route(net_, wx_, drone_, payload, t, from, to);
            } catch (const planner::NoRoute&) {
                return std::nullopt;
            }
        };
        auto route = attempt();
        if (route && route->total_energy <= d.battery_remaining) return route;
        if (d.battery_remaining < drone_.battery_capacity) {
            recharge(d, request_id, t);
            route = attempt();
            if (route && route->total_energy <= d.battery_remaining) return route;
        }
        return std::nullopt;
    }

    void fail(DroneState& d, const Request& req, double t, const std::string& reason) {
        d.available_at = t;
        log(d, req.request_id, t, EventKind::failure);
        out_.failures.push_back({req.request_id, reason});
    }

    const skynet::Network& net_;
    const weather::WeatherSeries& wx_;
    const flight::DroneSpec& drone_;
    const FleetConfig& cfg_;
    SimulationResult& out_;
};

}  // namespace

SimulationResult run_simulation(const skynet::Network& net, const weather::WeatherSeries& wx,
                                const flight::DroneSpec& drone, std::vector<DroneState> fleet,
                                const std::vector<Request>& requests, const FleetConfig& cfg,
                                const DispatchPolicy& policy) {
    if (fleet.empty()) throw std::invalid_argument("fleet must be non-empty");
    if (wx.node_count() != net.node_count()) throw std::invalid_argument("weather grid does not cover the network");
    for (const auto& r : requests) validate_request(r, net, drone, wx.horizon_s());

    std::vector<const Request*> order;
    order.reserve(requests.size());
    for (const auto& r : requests) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [](const Request* a, const Request* b) {
        return a->request_time < b->request_time;
    });

    SimulationResult result;
    Simulator sim(net, wx, drone, cfg, result);
    for (const Request* r : order) {
        const std::size_t idx = policy.choose(fleet, *r, net);
        sim.serve(fleet.at(idx), *r);
    }
    return result;
}

nlohmann::json to_json(const RouteRecord& r) { return nlohmann::json::parse(record_line(r)); }

std::string record_line(const RouteRecord& r) {
    nlohmann::ordered_json j;
    j["request_id"] = r.request_id;
    j["route_segments"] = nlohmann::ordered_json::array();
    for (const auto& s : r.route_segments) {
        nlohmann::ordered_json seg;
        seg["from_node"] = s.from_node;
        seg["to_node"] = s.to_node;
        seg["wind_speed"] = s.wind_speed;
        seg["wind_direction"] = s.wind_direction;
        seg["temperature"] = s.temperature;
        seg["distance"] = s.distance;
        seg["flight_duration"] = s.flight_duration;
        seg["battery_consumed"] = s.battery_consumed;
        j["route_segments"].push_back(std::move(seg));
    }
    if (r.payload_kg) j["payload_kg"] = *r.payload_kg;
    if (r.departure_time) j["departure_time"] = *r.departure_time;
    return j.dump();
}

RouteRecord record_from_json(const nlohmann::json& j) {
    RouteRecord r;
    r.request_id = j.at("request_id").get<int>();
    for (const auto& s : j.at("route_segments")) {
        RouteSegment seg;
        seg.from_node = s.at("from_node").get<int>();
        seg.to_node = s.at("to_node").get<int>();
        seg.wind_speed = s.at("wind_speed").get<double>();
        seg.wind_direction = s.at("wind_direction").get<double>();
        seg.temperature = s.at("temperature").get<double>();
        seg.distance = s.at("distance").get<double>();
        seg.flight_duration = s.at("flight_duration").get<double>();
        seg.battery_consumed = s.at("battery_consumed").get<double>();
        r.route_segments.push_back(seg);
    }
    if (j.contains("payload_kg")) r.payload_kg = j["payload_kg"].get<double>();
    if (j.contains("departure_time")) r.departure_time = j["departure_time"].get<double>();
    if (r.route_segments.empty()) throw std::invalid_argument("route_segments is empty");
    for (std::size_t i = 1; i < r.route_segments.size(); ++i) {
        if (r.route_segments[i - 1].to_node != r.route_segments[i].from_node) {
            throw std::invalid_argument("route_segments do not chain at index " + std::to_string(i));
        }
    }
    return r;
}

void write_dataset(const std::vector<RouteRecord>& records, std::ostream& out) {
    for (const auto& r : records) out << record_line(r) << '\n';
}

void write_dataset(const std::vector<RouteRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_dataset(records, out);
}

std::vector<RouteRecord> read_dataset(std::istream& in) {
    std::vector<RouteRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DatasetParseError(line_no, e.what());
        } catch (const std::invalid_argument& e) {
            throw DatasetParseError(line_no, e.what());
        }
    }
    return out;
}

std::vector<RouteRecord> read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset " + path.string());
    return read_dataset(in);
}

std::vector<std::string> check_record(const RouteRecord& r, const skynet::Network& net,
                                      const weather::WeatherSeries& wx, const flight::DroneSpec& drone) {
    std::vector<std::string> v;
    const std::string tag = "request " + std::to_string(r.request_id) + ": ";
    if (r.route_segments.empty()) {
        v.push_back(tag + "no segments");
        return v;
    }
    const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
    for (std::size_t i = 0; i < r.route_segments.size(); ++i) {
        const auto& s = r.route_segments[i];
        if (i > 0 && r.route_segments[i - 1].to_node != s.from_node) v.push_back(tag + "segments do not chain");
        if (!net.has_edge(s.from_node, s.to_node)) {
            v.push_back(tag + "segment " + std::to_string(i) + " is not a network edge");
            continue;
        }
        if (!close(s.distance, skynet::euclidean(net.node(s.from_node), net.node(s.to_node)))) {
            v.push_back(tag + "segment distance differs from edge length");
        }
        if (!(s.flight_duration > 0.0) || !(s.battery_consumed > 0.0)) v.push_back(tag + "non-positive segment cost");
        if (r.departure_time && r.payload_kg) {
            const auto& w = wx.snapshot_held(s.from_node, *r.departure_time);
            if (w.wind_speed != s.wind_speed || w.wind_bearing != s.wind_direction || w.temperature != s.temperature) {
                v.push_back(tag + "segment weather differs from the stored series");
            }
            const auto c = flight::edge_cost(net, s.from_node, s.to_node, w, drone, *r.payload_kg);
            if (!close(c.duration, s.flight_duration) || !close(c.energy, s.battery_consumed)) {
                v.push_back(tag + "segment cost differs from the cost model");
            }
        }
    }
    if (r.departure_time && r.payload_kg) {
        try {
            const auto replan =
                planner::plan_route(net, wx, drone, *r.payload_kg, *r.departure_time, r.origin(), r.destination());
            if (replan.node_sequence != r.node_sequence()) v.push_back(tag + "re-planned route differs from label");
        } catch (const planner::NoRoute&) {
            v.push_back(tag + "re-planning found no route");
        }
    }
    return v;
}

std::vector<std::string> check_battery_log(const std::vector<FleetEvent>& events, const flight::DroneSpec& drone) {
    std::vector<std::string> v;
    for (const auto& e : events) {
        if (e.battery_after < 0.0 || e.battery_after > drone.battery_capacity) {
            std::ostringstream msg;
            msg << "drone " << e.drone_id << " battery " << e.battery_after << " Wh out of bounds at t=" << e.t;
            v.push_back(msg.str());
        }
    }
    return v;
}

SimReport summarize(const SimulationResult& result, std::size_t request_count) {
    SimReport rep;
    rep.requests = request_count;
    rep.succeeded = result.records.size();
    rep.failed = result.failures.size();
    rep.success_rate = result.success_rate(request_count);
    rep.recharges = result.recharges;
    for (const auto& r : result.records) {
        for (const auto& s : r.route_segments) {
            rep.mean_duration += s.flight_duration;
            rep.mean_energy += s.battery_consumed;
        }
    }
    if (!result.records.empty()) {
        rep.mean_duration /= static_cast<double>(result.records.size());
        rep.mean_energy /= static_cast<double>(result.records.size());
    }
    return rep;
}

nlohmann::json to_json(const SimReport& r, const FleetConfig& cfg) {
    return {{"requests", r.requests},
            {"succeeded", r.succeeded},
            {"failed", r.failed},
            {"success_rate", r.success_rate},
            {"mean_route_duration_s", r.mean_duration},
            {"mean_route_energy_wh", r.mean_energy},
            {"recharges", r.recharges},
            {"fixtures",
             {{"drone_count", cfg.drone_count},
              {"recharge_threshold", cfg.recharge_threshold},
              {"charge_time_s", cfg.charge_time_s},
              {"dispatch", "nearest-earliest-available"}}}};
}

}  // namespace skyroute::fleet

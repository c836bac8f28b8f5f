#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skyroute/flightcost.hpp"
#include "skyroute/planner.hpp"
#include "skyroute/skynet.hpp"
#include "skyroute/weather.hpp"

namespace skyroute::fleet {

struct Request {
    int request_id = 0;
    int origin = 0;
    int destination = 0;
    double payload_kg = 0.0;
    double request_time = 0.0;  // s
};

/// One flown edge with the weather and costs used when it was planned. Field
/// names follow the dataset wire format.
struct RouteSegment {
    int from_node = 0;
    int to_node = 0;
    double wind_speed = 0.0;
    double wind_direction = 0.0;
    double temperature = 0.0;
    double distance = 0.0;
    double flight_duration = 0.0;
    double battery_consumed = 0.0;

    bool operator==(const RouteSegment&) const = default;
};

struct RouteRecord {
    int request_id = 0;
    std::vector<RouteSegment> route_segments;
    // Optional provenance; absent in records that carry only the base schema.
    std::optional<double> payload_kg;
    std::optional<double> departure_time;

    int origin() const { return route_segments.front().from_node; }
    int destination() const { return route_segments.back().to_node; }
    std::vector<int> node_sequence() const;
    double total_distance() const;

    bool operator==(const RouteRecord&) const = default;
};

struct DroneState {
    int drone_id = 0;
    int current_node = 0;
    double battery_remaining = 0.0;  // Wh
    double available_at = 0.0;       // s
};

struct PayloadRange {
    double min_kg = 0.1;
    double max_kg = 5.0;
};

/// Uniform distinct origin/destination pairs, uniform payloads and request
/// times, sorted by request time. Throws std::invalid_argument when the
/// payload range exceeds max_payload (oversized requests never reach the
/// simulator) or the network has fewer than two nodes.
std::vector<Request> generate_requests(const skynet::Network& net, int count, double horizon_s,
                                       PayloadRange payload, double max_payload, std::uint64_t seed);

/// Throws std::invalid_argument for a request the simulator must not accept.
void validate_request(const Request& r, const skynet::Network& net, const flight::DroneSpec& drone,
                      double horizon_s);

struct FleetConfig {
    int drone_count = 100;
    double recharge_threshold = 0.2;  // fraction of capacity
    double charge_time_s = 1800.0;
    std::uint64_t seed = 1;
};

/// Drones start fully charged at uniformly drawn nodes.
std::vector<DroneState> make_fleet(const skynet::Network& net, const flight::DroneSpec& drone, const FleetConfig& cfg);

/// Picks the drone for a request. Default policy: earliest ready time, then
/// nearest (Euclidean) to the origin, then lowest id.
class DispatchPolicy {
public:
    virtual ~DispatchPolicy() = default;
    virtual std::size_t choose(const std::vector<DroneState>& fleet, const Request& req,
                               const skynet::Network& net) const = 0;
};

class NearestEarliestDispatch final : public DispatchPolicy {
public:
    std::size_t choose(const std::vector<DroneState>& fleet, const Request& req,
                       const skynet::Network& net) const override;
};

enum class EventKind { dispatch, recharge, reposition, delivery, failure };

std::string_view to_string(EventKind k) noexcept;

struct FleetEvent {
    int drone_id = 0;
    int request_id = -1;
    double t = 0.0;
    EventKind kind = EventKind::dispatch;
    int node = 0;
    double battery_after = 0.0;
};

struct FailedRequest {
    int request_id = 0;
    std::string reason;
};

struct SimulationResult {
    std::vector<RouteRecord> records;
    std::vector<FailedRequest> failures;
    std::vector<FleetEvent> events;
    int recharges = 0;

    double success_rate(std::size_t request_count) const {
        return request_count == 0 ? 0.0 : static_cast<double>(records.size()) / static_cast<double>(request_count);
    }
};

/// Single-threaded event loop in request-time order. Each request: recharge
/// if below threshold, reposition to the origin (charged, not recorded),
/// plan with A* against the weather at departure, fly, debit the battery per
/// segment. Requests that cannot be flown even on a full battery fail.
SimulationResult run_simulation(const skynet::Network& net, const weather::WeatherSeries& wx,
                                const flight::DroneSpec& drone, std::vector<DroneState> fleet,
                                const std::vector<Request>& requests, const FleetConfig& cfg,
                                const DispatchPolicy& policy = NearestEarliestDispatch{});

nlohmann::json to_json(const RouteRecord& r);
RouteRecord record_from_json(const nlohmann::json& j);

std::string record_line(const RouteRecord& r);

class DatasetParseError : public std::runtime_error {
public:
    DatasetParseError(std::size_t line, const std::string& what)
        : std::runtime_error("dataset line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

void write_dataset(const std::vector<RouteRecord>& records, std::ostream& out);
void write_dataset(const std::vector<RouteRecord>& records, const std::filesystem::path& path);
std::vector<RouteRecord> read_dataset(std::istream& in);
std::vector<RouteRecord> read_dataset(const std::filesystem::path& path);

/// Checks one record: segment chaining, adjacency, per-segment agreement with
/// the stored weather and the cost model, and (when provenance is present)
/// that a fresh A* plan reproduces the node sequence. Returns violations.
std::vector<std::string> check_record(const RouteRecord& r, const skynet::Network& net,
                                      const weather::WeatherSeries& wx, const flight::DroneSpec& drone);

/// Battery bounds over the event log.
std::vector<std::string> check_battery_log(const std::vector<FleetEvent>& events, const flight::DroneSpec& drone);

struct SimReport {
    std::size_t requests = 0;
    std::size_t succeeded = 0;
    std::size_t failed = 0;
    double success_rate = 0.0;
    double mean_duration = 0.0;
    double mean_energy = 0.0;
    int recharges = 0;
};

SimReport summarize(const SimulationResult& result, std::size_t request_count);
nlohmann::json to_json(const SimReport& r, const FleetConfig& cfg);

}  // namespace skyroute::fleet

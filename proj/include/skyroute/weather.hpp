#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "skyroute/skynet.hpp"

namespace skyroute::weather {

struct WeatherSample {
    int node_id = 0;
    double t = 0.0;             // seconds since simulation start
    double wind_speed = 0.0;    // m/s
    double wind_bearing = 0.0;  // degrees, direction the wind blows FROM
    double temperature = 0.0;   // deg C
    double visibility = 0.0;    // km
    double cloud_cover = 0.0;   // percent

    bool operator==(const WeatherSample&) const = default;
};

/// Clamp ranges used by the synthetic generator.
namespace limits {
inline constexpr double kWindMin = 0.0;
inline constexpr double kWindMax = 15.0;
inline constexpr double kTempMin = -5.0;
inline constexpr double kTempMax = 35.0;
inline constexpr double kVisibilityMax = 20.0;
}  // namespace limits

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class GridIncomplete : public std::runtime_error {
public:
    GridIncomplete(int node_id, double t)
        : std::runtime_error("missing weather cell (node_id=" + std::to_string(node_id) +
                             ", t=" + std::to_string(t) + ")"),
          node_id_(node_id), t_(t) {}
    int node_id() const noexcept { return node_id_; }
    double t() const noexcept { return t_; }

private:
    int node_id_;
    double t_;
};

class RangeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OutOfHorizon : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Dense node x time-step grid sampled every interval_s seconds. Steps run
/// t = 0, interval, ..., horizon_s, so there are horizon_s / interval_s + 1.
class WeatherSeries {
public:
    WeatherSeries() = default;
    /// samples are node-major: samples[node * steps + step].
    WeatherSeries(double interval_s, int node_count, int steps, std::vector<WeatherSample> samples);

    double interval_s() const noexcept { return interval_s_; }
    double horizon_s() const noexcept { return interval_s_ * (steps_ - 1); }
    int node_count() const noexcept { return node_count_; }
    int steps() const noexcept { return steps_; }
    const std::vector<WeatherSample>& samples() const noexcept { return samples_; }

    const WeatherSample& at(int node_id, int step) const {
        return samples_[static_cast<std::size_t>(node_id) * steps_ + step];
    }

    /// Zero-order hold: sample at floor(t / interval_s), with t = horizon_s
    /// mapping to the final step. Throws OutOfHorizon outside [0, horizon_s].
    const WeatherSample& snapshot_at(int node_id, double t) const;

    /// As snapshot_at, but times past the horizon hold the final sample.
    /// Used by the simulator for flights that outlast the series.
    const WeatherSample& snapshot_held(int node_id, double t) const;

    int step_index(double t) const;

    /// Largest wind speed anywhere in the series.
    double max_wind_speed() const;

    bool operator==(const WeatherSeries&) const = default;

private:
    double interval_s_ = 1.0;
    int node_count_ = 0;
    int steps_ = 0;
    std::vector<WeatherSample> samples_;
};

WeatherSeries synth_weather(const skynet::Network& net, double horizon_s, double interval_s,
                            std::uint64_t seed);

/// Throws RangeError when a field is outside its physical range.
void validate_sample(const WeatherSample& s);

nlohmann::json to_json(const WeatherSample& s);
WeatherSample sample_from_json(const nlohmann::json& j);

/// JSON-lines: one sample per line, node-major.
void write_weather(const WeatherSeries& series, const std::filesystem::path& path);
void write_weather(const WeatherSeries& series, std::ostream& out);

/// Throws ParseError, GridIncomplete or RangeError.
WeatherSeries load_weather(const std::filesystem::path& path);
WeatherSeries read_weather(std::istream& in);

}  // namespace skyroute::weather

#include "skyroute/weather.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "skyroute/rng.hpp"

namespace skyroute::weather {

WeatherSeries::WeatherSeries(double interval_s, int node_count, int steps,
                             std::vector<WeatherSample> samples)
    : interval_s_(interval_s), node_count_(node_count), steps_(steps), samples_(std::move(samples)) {
    if (!(interval_s > 0.0)) throw std::invalid_argument("interval_s must be positive");
    if (steps < 1 || node_count < 0) throw std::invalid_argument("empty weather grid");
    if (samples_.size() != static_cast<std::size_t>(node_count) * static_cast<std::size_t>(steps)) {
        throw std::invalid_argument("sample count does not match grid shape");
    }
}

int WeatherSeries::step_index(double t) const {
    if (!(t >= 0.0) || t > horizon_s()) {
        throw OutOfHorizon("t=" + std::to_string(t) + " outside [0, " + std::to_string(horizon_s()) + "]");
    }
    const auto k = static_cast<int>(std::floor(t / interval_s_));
    return std::min(k, steps_ - 1);
}

const WeatherSample& WeatherSeries::snapshot_at(int node_id, double t) const {
    if (node_id < 0 || node_id >= node_count_) throw std::out_of_range("unknown node_id");
    return at(node_id, step_index(t));
}

const WeatherSample& WeatherSeries::snapshot_held(int node_id, double t) const {
    return snapshot_at(node_id, std::clamp(t, 0.0, horizon_s()));
}

double WeatherSeries::max_wind_speed() const {
    double m = 0.0;
    for (const auto& s : samples_) m = std::max(m, s.wind_speed);
    return m;
}

namespace {

double wrap_degrees(double d) {
    d = std::fmod(d, 360.0);
    if (d < 0.0) d += 360.0;
    if (d >= 360.0) d -= 360.0;
    return d;
}

/// Discretised Ornstein-Uhlenbeck step: x += theta (mu - x) + sigma * eps.
struct MeanReverting {
    double mean;
    double theta;
    double sigma;
    double value;
    double step(Rng& rng) {
        value += theta * (mean - value) + sigma * rng.normal();
        return value;
    }
};

}  // namespace

WeatherSeries synth_weather(const skynet::Network& net, double horizon_s, double interval_s,
                            std::uint64_t seed) {
    if (!(interval_s > 0.0)) throw std::invalid_argument("interval_s must be positive");
    if (!(horizon_s >= interval_s)) throw std::invalid_argument("horizon_s must be >= interval_s");
    const int steps = static_cast<int>(std::floor(horizon_s / interval_s + 1e-9)) + 1;
    const int n = net.node_count();

    Rng rng(derive_seed(seed, stream::kWeather));

    // Regional base signals shared by all nodes.
    MeanReverting wind{6.0, 0.08, 0.6, rng.uniform(3.0, 9.0)};
    MeanReverting bearing_drift{0.0, 0.05, 8.0, 0.0};
    double bearing = rng.uniform(0.0, 360.0);
    MeanReverting temp_anom{0.0, 0.1, 0.5, rng.normal()};
    const double temp_mean = rng.uniform(5.0, 22.0);
    const double diurnal_amp = rng.uniform(3.0, 7.0);
    MeanReverting vis{14.0, 0.1, 0.8, rng.uniform(8.0, 18.0)};
    MeanReverting cloud{45.0, 0.08, 5.0, rng.uniform(10.0, 80.0)};

    struct Base {
        double wind, bearing, temp, vis, cloud;
    };
    std::vector<Base> base(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) {
        const double t = k * interval_s;
        if (k > 0) {
            wind.step(rng);
            bearing = wrap_degrees(bearing + bearing_drift.step(rng));
            temp_anom.step(rng);
            vis.step(rng);
            cloud.step(rng);
        }
        const double diurnal = diurnal_amp * std::sin(2.0 * std::numbers::pi * (t / 86400.0 - 0.375));
        base[k] = {wind.value, bearing, temp_mean + diurnal + temp_anom.value, vis.value, cloud.value};
    }

    // Per-node perturbations: a static spatial gradient plus a local OU term.
    double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
    if (n > 0) {
        const auto [mnx, mxx] = std::minmax_element(net.nodes().begin(), net.nodes().end(),
                                                    [](auto& a, auto& b) { return a.x < b.x; });
        const auto [mny, mxy] = std::minmax_element(net.nodes().begin(), net.nodes().end(),
                                                    [](auto& a, auto& b) { return a.y < b.y; });
        min_x = mnx->x;
        max_x = std::max(mxx->x, min_x + 1.0);
        min_y = mny->y;
        max_y = std::max(mxy->y, min_y + 1.0);
    }
    const double grad_wind = rng.uniform(-1.5, 1.5);
    const double grad_temp = rng.uniform(-2.0, 2.0);

    std::vector<WeatherSample> samples(static_cast<std::size_t>(n) * steps);
    for (int i = 0; i < n; ++i) {
        const auto& node = net.node(i);
        const double px = (node.x - min_x) / (max_x - min_x) - 0.5;
        const double py = (node.y - min_y) / (max_y - min_y) - 0.5;
        Rng local(derive_seed(seed, stream::kWeather + 1 + static_cast<std::uint64_t>(i)));
        MeanReverting dw{0.0, 0.15, 0.35, 0.5 * local.normal()};
        MeanReverting db{0.0, 0.15, 3.0, 5.0 * local.normal()};
        MeanReverting dt{0.0, 0.15, 0.3, 0.5 * local.normal()};
        MeanReverting dv{0.0, 0.15, 0.4, local.normal()};
        MeanReverting dc{0.0, 0.15, 3.0, 5.0 * local.normal()};
        for (int k = 0; k < steps; ++k) {
            if (k > 0) {
                dw.step(local);
                db.step(local);
                dt.step(local);
                dv.step(local);
                dc.step(local);
            }
            const auto& b = base[k];
            WeatherSample s;
            s.node_id = i;
            s.t = k * interval_s;
            s.wind_speed = std::clamp(b.wind + grad_wind * px + dw.value, limits::kWindMin, limits::kWindMax);
            s.wind_bearing = wrap_degrees(b.bearing + db.value);
            s.temperature = std::clamp(b.temp + grad_temp * py + dt.value, limits::kTempMin, limits::kTempMax);
            s.visibility = std::clamp(b.vis + dv.value, 0.0, limits::kVisibilityMax);
            s.cloud_cover = std::clamp(b.cloud + dc.value, 0.0, 100.0);
            samples[static_cast<std::size_t>(i) * steps + k] = s;
        }
    }
    return WeatherSeries(interval_s, n, steps, std::move(samples));
}

void validate_sample(const WeatherSample& s) {
    auto fail = [&](const std::string& field, double v) {
        std::ostringstream msg;
        msg << field << "=" << v << " out of range (node_id=" << s.node_id << ", t=" << s.t << ")";
        throw RangeError(msg.str());
    };
    if (!std::isfinite(s.t) || s.t < 0.0) fail("t", s.t);
    if (!std::isfinite(s.wind_speed) || s.wind_speed < 0.0) fail("wind_speed", s.wind_speed);
    if (!std::isfinite(s.wind_bearing) || s.wind_bearing < 0.0 || s.wind_bearing >= 360.0) {
        fail("wind_bearing", s.wind_bearing);
    }
    if (!std::isfinite(s.temperature)) fail("temperature", s.temperature);
    if (!std::isfinite(s.visibility) || s.visibility < 0.0) fail("visibility", s.visibility);
    if (!std::isfinite(s.cloud_cover) || s.cloud_cover < 0.0 || s.cloud_cover > 100.0) {
        fail("cloud_cover", s.cloud_cover);
    }
}

nlohmann::json to_json(const WeatherSample& s) {
    nlohmann::ordered_json j;
    j["node_id"] = s.node_id;
    j["t"] = s.t;
    j["wind_speed"] = s.wind_speed;
    j["wind_bearing"] = s.wind_bearing;
    j["temperature"] = s.temperature;
    j["visibility"] = s.visibility;
    j["cloud_cover"] = s.cloud_cover;
    return nlohmann::json(j);
}

WeatherSample sample_from_json(const nlohmann::json& j) {
    WeatherSample s;
    s.node_id = j.at("node_id").get<int>();
    s.t = j.at("t").get<double>();
    s.wind_speed = j.at("wind_speed").get<double>();
    s.wind_bearing = j.at("wind_bearing").get<double>();
    s.temperature = j.at("temperature").get<double>();
    s.visibility = j.at("visibility").get<double>();
    s.cloud_cover = j.at("cloud_cover").get<double>();
    return s;
}

namespace {

std::string sample_line(const WeatherSample& s) {
    nlohmann::ordered_json j;
    j["node_id"] = s.node_id;
    j["t"] = s.t;
    j["wind_speed"] = s.wind_speed;
    j["wind_bearing"] = s.wind_bearing;
    j["temperature"] = s.temperature;
    j["visibility"] = s.visibility;
    j["cloud_cover"] = s.cloud_cover;
    return j.dump();
}

}  // namespace

void write_weather(const WeatherSeries& series, std::ostream& out) {
    for (const auto& s : series.samples()) out << sample_line(s) << '\n';
}

void write_weather(const WeatherSeries& series, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_weather(series, out);
}

WeatherSeries read_weather(std::istream& in) {
    std::vector<WeatherSample> parsed;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        WeatherSample s;
        try {
            s = sample_from_json(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        validate_sample(s);
        parsed.push_back(s);
    }
    if (parsed.empty()) throw ParseError(line_no, "no weather samples");

    int max_node = -1;
    std::vector<double> times;
    for (const auto& s : parsed) {
        if (s.node_id < 0) throw RangeError("negative node_id");
        max_node = std::max(max_node, s.node_id);
        times.push_back(s.t);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    const double interval = times.size() > 1 ? times[1] - times[0] : 1.0;
    if (times.front() != 0.0) throw GridIncomplete(0, 0.0);
    const int steps = static_cast<int>(std::llround(times.back() / interval)) + 1;
    const int nodes = max_node + 1;

    std::vector<WeatherSample> grid(static_cast<std::size_t>(nodes) * steps);
    std::vector<char> filled(grid.size(), 0);
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        const auto& s = parsed[i];
        const double k_real = s.t / interval;
        const auto k = static_cast<int>(std::llround(k_real));
        if (std::abs(k_real - k) > 1e-9 || s.t != k * interval) {
            throw RangeError("t=" + std::to_string(s.t) + " is not a multiple of the sampling interval");
        }
        const std::size_t cell = static_cast<std::size_t>(s.node_id) * steps + k;
        if (filled[cell]) {
            throw RangeError("duplicate weather cell (node_id=" + std::to_string(s.node_id) +
                             ", t=" + std::to_string(s.t) + ")");
        }
        filled[cell] = 1;
        grid[cell] = s;
    }
    for (int i = 0; i < nodes; ++i) {
        for (int k = 0; k < steps; ++k) {
            if (!filled[static_cast<std::size_t>(i) * steps + k]) throw GridIncomplete(i, k * interval);
        }
    }
    return WeatherSeries(interval, nodes, steps, std::move(grid));
}

WeatherSeries load_weather(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open weather file " + path.string());
    return read_weather(in);
}

}  // namespace skyroute::weather

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "skyroute/fleetsim.hpp"
#include "skyroute/models/model.hpp"
#include "skyroute/models/train.hpp"
#include "skyroute/skynet.hpp"

namespace skyroute::harness {

struct WeatherStageConfig {
    double horizon_s = 24 * 3600.0;
    double interval_s = 1800.0;
    std::uint64_t seed = 1;
    /// false: skip generation and read paths.weather at the simulate stage.
    bool generate = true;
};

struct RequestConfig {
    int count = 500;
    fleet::PayloadRange payload{};
    std::uint64_t seed = 1;
};

struct EvalConfig {
    int rollout_episodes = 100;
    std::uint64_t episode_seed = 1;
    std::size_t latency_samples = 200;
};

/// How trained transformers run at inference time.
enum class InferenceMode { autodiff, f64, f32 };

std::string to_string(InferenceMode m);
InferenceMode inference_mode_from_string(const std::string& s);

struct BenchConfig {
    bool enabled = true;
    int repetitions = 30;
    int warmup = 10;
    skynet::NetConfig network = default_network();
    std::vector<int> n_values{50, 100, 200, 400};
    std::vector<int> w_values{50, 100, 200, 400};
    int hold_n = 100;  // query tokens while w varies
    int hold_w = 100;  // weather tokens while n varies
    std::uint64_t seed = 3;

    /// 500 nodes at the desk-scale density.
    static skynet::NetConfig default_network();
    void validate() const;
};

struct Paths {
    std::filesystem::path out_dir = "run";
    /// Empty: <out_dir>/weather.jsonl.
    std::filesystem::path weather;

    std::filesystem::path weather_file() const { return weather.empty() ? out_dir / "weather.jsonl" : weather; }
};

/// Everything a pipeline run depends on. Written next to the outputs; loading
/// it back and running again reproduces every non-timing artifact.
struct RunConfig {
    skynet::NetConfig network{};
    WeatherStageConfig weather{};
    flight::DroneSpec drone{};
    RequestConfig requests{};
    fleet::FleetConfig fleet{};
    models::TrainConfig train{};
    std::vector<models::ModelConfig> models = default_models();
    InferenceMode inference = InferenceMode::f32;
    EvalConfig eval{};
    BenchConfig bench{};
    Paths paths{};

    static std::vector<models::ModelConfig> default_models();
    void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Missing keys keep their defaults. Throws std::invalid_argument on bad
/// values and nlohmann::json::exception on bad types.
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& c, const std::filesystem::path& path);

nlohmann::json to_json(const fleet::FleetConfig& c);
fleet::FleetConfig fleet_config_from_json(const nlohmann::json& j);

}  // namespace skyroute::harness

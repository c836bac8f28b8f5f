#include "skyroute/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace skyroute::harness {

std::string to_string(InferenceMode m) {
    switch (m) {
        case InferenceMode::autodiff: return "autodiff";
        case InferenceMode::f64: return "f64";
        case InferenceMode::f32: return "f32";
    }
    return "?";
}

InferenceMode inference_mode_from_string(const std::string& s) {
    if (s == "autodiff") return InferenceMode::autodiff;
    if (s == "f64") return InferenceMode::f64;
    if (s == "f32") return InferenceMode::f32;
    throw std::invalid_argument("unknown inference mode '" + s + "' (autodiff, f64, f32)");
}

skynet::NetConfig BenchConfig::default_network() {
    skynet::NetConfig c;
    c.node_count = 500;
    c.width_m = c.height_m = 10000.0 * std::sqrt(10.0);
    c.extra_edges = 250;
    c.seed = 3;
    return c;
}

void BenchConfig::validate() const {
    if (repetitions < 30) throw std::invalid_argument("bench repetitions must be >= 30");
    if (warmup < 10) throw std::invalid_argument("bench warmup must be >= 10");
    if (n_values.size() < 3 || w_values.size() < 3) throw std::invalid_argument("scaling needs >= 3 values per axis");
    for (int v : n_values) {
        if (v < 1) throw std::invalid_argument("scaling n values must be positive");
    }
    for (int v : w_values) {
        if (v < 1) throw std::invalid_argument("scaling w values must be positive");
    }
    if (hold_n < 1 || hold_w < 1) throw std::invalid_argument("scaling hold values must be positive");
    network.validate();
}

std::vector<models::ModelConfig> RunConfig::default_models() {
    std::vector<models::ModelConfig> out;
    for (auto k : {models::ModelKind::greedy, models::ModelKind::knn, models::ModelKind::ffnn,
                   models::ModelKind::transformer}) {
        models::ModelConfig m;
        m.kind = k;
        out.push_back(m);
    }
    return out;
}

void RunConfig::validate() const {
    network.validate();
    if (!(weather.interval_s > 0.0) || !(weather.horizon_s >= weather.interval_s)) {
        throw std::invalid_argument("weather needs interval_s > 0 and horizon_s >= interval_s");
    }
    drone.validate();
    if (requests.count < 1) throw std::invalid_argument("requests.count must be >= 1");
    if (fleet.drone_count < 1) throw std::invalid_argument("fleet.drone_count must be >= 1");
    train.validate();
    if (models.empty()) throw std::invalid_argument("no models configured");
    for (const auto& m : models) m.validate();
    if (eval.rollout_episodes < 0) throw std::invalid_argument("eval.rollout_episodes must be >= 0");
    if (bench.enabled) bench.validate();
}

nlohmann::json to_json(const fleet::FleetConfig& c) {
    return {{"drone_count", c.drone_count},
            {"recharge_threshold", c.recharge_threshold},
            {"charge_time_s", c.charge_time_s},
            {"seed", c.seed}};
}

fleet::FleetConfig fleet_config_from_json(const nlohmann::json& j) {
    fleet::FleetConfig c;
    c.drone_count = j.value("drone_count", c.drone_count);
    c.recharge_threshold = j.value("recharge_threshold", c.recharge_threshold);
    c.charge_time_s = j.value("charge_time_s", c.charge_time_s);
    c.seed = j.value("seed", c.seed);
    return c;
}

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : c.models) models.push_back(models::to_json(m));
    return {
        {"network", skynet::to_json(c.network)},
        {"weather",
         {{"horizon_s", c.weather.horizon_s},
          {"interval_s", c.weather.interval_s},
          {"seed", c.weather.seed},
          {"generate", c.weather.generate}}},
        {"drone", flight::to_json(c.drone)},
        {"requests",
         {{"count", c.requests.count},
          {"payload_min_kg", c.requests.payload.min_kg},
          {"payload_max_kg", c.requests.payload.max_kg},
          {"seed", c.requests.seed}}},
        {"fleet", to_json(c.fleet)},
        {"train", models::to_json(c.train)},
        {"models", models},
        {"inference", to_string(c.inference)},
        {"eval",
         {{"rollout_episodes", c.eval.rollout_episodes},
          {"episode_seed", c.eval.episode_seed},
          {"latency_samples", c.eval.latency_samples}}},
        {"bench",
         {{"enabled", c.bench.enabled},
          {"repetitions", c.bench.repetitions},
          {"warmup", c.bench.warmup},
          {"network", skynet::to_json(c.bench.network)},
          {"n_values", c.bench.n_values},
          {"w_values", c.bench.w_values},
          {"hold_n", c.bench.hold_n},
          {"hold_w", c.bench.hold_w},
          {"seed", c.bench.seed}}},
        {"paths", {{"out_dir", c.paths.out_dir.string()}, {"weather", c.paths.weather.string()}}},
    };
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    const nlohmann::json empty = nlohmann::json::object();
    auto section = [&](const char* key) -> const nlohmann::json& { return j.contains(key) ? j.at(key) : empty; };

    if (j.contains("network")) c.network = skynet::net_config_from_json(j["network"]);
    const auto& w = section("weather");
    c.weather.horizon_s = w.value("horizon_s", c.weather.horizon_s);
    c.weather.interval_s = w.value("interval_s", c.weather.interval_s);
    c.weather.seed = w.value("seed", c.weather.seed);
    c.weather.generate = w.value("generate", c.weather.generate);
    if (j.contains("drone")) c.drone = flight::drone_spec_from_json(j["drone"]);
    const auto& r = section("requests");
    c.requests.count = r.value("count", c.requests.count);
    c.requests.payload.min_kg = r.value("payload_min_kg", c.requests.payload.min_kg);
    c.requests.payload.max_kg = r.value("payload_max_kg", c.requests.payload.max_kg);
    c.requests.seed = r.value("seed", c.requests.seed);
    if (j.contains("fleet")) c.fleet = fleet_config_from_json(j["fleet"]);
    if (j.contains("train")) c.train = models::train_config_from_json(j["train"]);
    if (j.contains("models")) {
        c.models.clear();
        for (const auto& m : j["models"]) c.models.push_back(models::model_config_from_json(m));
    }
    if (j.contains("inference")) c.inference = inference_mode_from_string(j["inference"].get<std::string>());
    const auto& e = section("eval");
    c.eval.rollout_episodes = e.value("rollout_episodes", c.eval.rollout_episodes);
    c.eval.episode_seed = e.value("episode_seed", c.eval.episode_seed);
    c.eval.latency_samples = e.value("latency_samples", c.eval.latency_samples);
    const auto& b = section("bench");
    c.bench.enabled = b.value("enabled", c.bench.enabled);
    c.bench.repetitions = b.value("repetitions", c.bench.repetitions);
    c.bench.warmup = b.value("warmup", c.bench.warmup);
    if (b.contains("network")) c.bench.network = skynet::net_config_from_json(b["network"]);
    c.bench.n_values = b.value("n_values", c.bench.n_values);
    c.bench.w_values = b.value("w_values", c.bench.w_values);
    c.bench.hold_n = b.value("hold_n", c.bench.hold_n);
    c.bench.hold_w = b.value("hold_w", c.bench.hold_w);
    c.bench.seed = b.value("seed", c.bench.seed);
    const auto& p = section("paths");
    c.paths.out_dir = p.value("out_dir", c.paths.out_dir.string());
    c.paths.weather = p.value("weather", c.paths.weather.string());
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read run config " + path.string());
    return run_config_from_json(nlohmann::json::parse(in));
}

void save_run_config(const RunConfig& c, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_json(c).dump(2) << '\n';
}

}  // namespace skyroute::harness

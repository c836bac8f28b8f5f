#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "skyroute/harness/config.hpp"
#include "skyroute/models/rollout.hpp"
#include "skyroute/models/train.hpp"

namespace skyroute::harness {

/// Times f over `repetitions` calls after `warmup` untimed ones.
models::LatencyStats time_calls(const std::function<void(int)>& f, int repetitions, int warmup);

/// Planning instances on one network: origin, destination, departure time and
/// payload per query.
struct InstanceSet {
    const skynet::Network* net = nullptr;
    const weather::WeatherSeries* wx = nullptr;
    flight::DroneSpec drone{};
    std::shared_ptr<const models::NetworkContext> ctx;
    std::vector<models::RolloutQuery> queries;
};

InstanceSet make_instance_set(const skynet::Network& net, const weather::WeatherSeries& wx,
                              const flight::DroneSpec& drone, int count, std::uint64_t seed);

struct BenchReport {
    std::string model;
    int n = 0;  // network nodes
    int w = 0;  // weather features per node token
    std::size_t model_bytes = 0;
    int repetitions = 0;
    int warmup = 0;
    models::LatencyStats encode;    // features of one decision
    models::LatencyStats decision;  // one next-node prediction
    models::LatencyStats astar;     // one full A* plan
    models::LatencyStats rollout;   // one full model rollout
    double mean_path_hops = 0.0;
    double mean_rollout_decisions = 0.0;
    double rollout_success_rate = 0.0;
    double speedup_decision = 0.0;  // astar mean / decision mean
    double speedup_rollout = 0.0;   // astar mean / rollout mean
};

nlohmann::json to_json(const BenchReport& r);

/// Same-machine comparison of the model against A* on identical instances.
/// Throws std::invalid_argument unless repetitions >= 30 and warmup >= 10.
BenchReport bench_inference(const models::Model& model, std::size_t model_bytes, const InstanceSet& set,
                            int repetitions, int warmup = 10);

/// A model family under the scaling sweep: prepare(n, w) builds the inputs
/// for n node tokens and w weather tokens and returns one prediction call.
class ScalingSubject {
public:
    virtual ~ScalingSubject() = default;
    virtual std::string name() const = 0;
    virtual std::function<void()> prepare(int n, int w) = 0;
};

/// FFNN: n candidate rows, w unused. Transformer: n query tokens attending to
/// w weather tokens. Weights are random; latency does not depend on them.
std::unique_ptr<ScalingSubject> make_scaling_subject(const models::ModelConfig& cfg, InferenceMode mode, int max_n,
                                                     std::uint64_t seed);

/// Constant-time calibration subject.
std::unique_ptr<ScalingSubject> make_stub_subject();

struct ScalingPoint {
    std::string axis;  // "n" or "w"
    int n = 0;
    int w = 0;
    models::LatencyStats latency;
};

struct ScalingTable {
    std::string family;
    std::vector<ScalingPoint> points;
    double slope_n = 0.0;  // log-log, median latency
    double slope_w = 0.0;
    bool monotone_n = false;
    bool monotone_w = false;
};

nlohmann::json to_json(const ScalingTable& t);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Sweeps n (holding w = hold_w) and w (holding n = hold_n). Throws
/// std::invalid_argument with fewer than 3 values on either axis.
ScalingTable bench_scaling(ScalingSubject& subject, const std::vector<int>& n_values,
                           const std::vector<int>& w_values, int hold_n, int hold_w, int repetitions, int warmup);

}  // namespace skyroute::harness

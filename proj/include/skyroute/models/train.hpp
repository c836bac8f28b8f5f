#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "skyroute/models/model.hpp"
#include "skyroute/nn/loss.hpp"
#include "skyroute/nn/optim.hpp"

namespace skyroute::models {

class Diverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    int batch_size = 128;
    int epochs = 30;
    nn::OptimConfig optim{};
    /// total_steps <= 0 means epochs * batches per epoch; warmup is capped
    /// below the total for short runs.
    nn::ScheduleConfig sched{100, 0};
    nn::LossConfig loss{};
    double train_frac = 0.8;
    double val_frac = 0.1;
    std::uint64_t seed = 1;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    std::unique_ptr<StoredModel> model;
    std::vector<EpochStats> curves;
    long steps = 0;
    double seconds = 0.0;
};

/// Resolved schedule for n training samples.
nn::ScheduleConfig resolve_schedule(const TrainConfig& cfg, std::size_t n_train);

/// Fits a model. Gradient models run shuffled mini-batches with AdamW,
/// lr = optim.lr * lr_factor(step), global-norm clipping before each step.
/// Throws Diverged on a non-finite loss or gradient.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg, int node_count,
                  std::span<const Sample> train_set, std::span<const Sample> val_set);

/// Mean loss (with cfg) and accuracy of a gradient model, evaluation mode.
std::pair<double, double> loss_and_accuracy(const Model& model, std::span<const Sample> samples,
                                            const nn::LossConfig& cfg, int batch_size = 256);

struct LatencyStats {
    double mean_ns = 0.0;
    double p50_ns = 0.0;
    double p95_ns = 0.0;
    std::size_t count = 0;
};

LatencyStats latency_stats(std::vector<double> ns);

struct Confusion {
    int label = 0;
    int predicted = 0;
    long count = 0;
};

struct EvalReport {
    std::string model;
    std::size_t samples = 0;
    double accuracy = 0.0;
    double precision = 0.0;  // macro over node classes
    double recall = 0.0;
    double f1 = 0.0;
    long correct = 0;
    std::vector<Confusion> top_confusions;
    LatencyStats latency;
};

nlohmann::json to_json(const EvalReport& r);

/// Accuracy and macro P/R/F1 of argmax predictions, plus single-sample
/// latency over the first latency_samples samples.
EvalReport evaluate(const Model& model, std::span<const Sample> samples, std::size_t latency_samples = 200);

}  // namespace skyroute::models

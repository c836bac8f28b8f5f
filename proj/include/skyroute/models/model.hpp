#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "skyroute/models/features.hpp"
#include "skyroute/nn/layers.hpp"
#include "skyroute/planner.hpp"

namespace skyroute::models {

enum class ModelKind { greedy, knn, ffnn, transformer };

/// Arithmetic used by frozen (inference-only) forward passes.
enum class Precision { f64, f32 };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct ModelConfig {
    ModelKind kind = ModelKind::transformer;
    std::vector<int> ffnn_hidden{128, 64};
    nn::AttentionConfig attention{};
    int n_layers = 2;
    int ff_dim = 256;
    bool weather_aware = true;  // transformer only
    int knn_k = 5;
    // Feature scaling for the KNN distance: current-node coordinates,
    // destination coordinates, and the remaining request fields.
    double knn_current_weight = 10.0;
    double knn_dest_weight = 3.0;
    double knn_context_weight = 0.3;

    void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

using Batch = std::span<const Sample* const>;

/// Next-node predictor. Probabilities are aligned with sample.candidates():
/// entries for non-neighbors do not exist, so masked mass is zero by layout.
class Model {
public:
    virtual ~Model() = default;

    virtual std::string name() const = 0;
    virtual std::vector<std::vector<double>> predict_batch(Batch batch) const = 0;

    std::vector<double> predict_next(const Sample& s) const;

    /// Trainable models expose raw logits [batch, max candidates] with their
    /// parameters; the defaults describe a model with nothing to train.
    virtual bool trainable() const { return false; }
    virtual nn::Tensor logits(Batch batch, bool training, Rng* rng) const;
    virtual std::vector<nn::NamedTensor> parameters() const { return {}; }
};

/// A model that also knows how to serialize itself.
class StoredModel : public Model {
public:
    explicit StoredModel(ModelConfig cfg, int node_count) : cfg_(std::move(cfg)), node_count_(node_count) {}

    const ModelConfig& config() const noexcept { return cfg_; }
    int node_count() const noexcept { return node_count_; }
    std::string name() const override { return to_string(cfg_.kind); }

    /// Training-time hook for non-gradient models (KNN memorizes samples).
    virtual void fit(std::span<const Sample> /*train*/) {}

protected:
    ModelConfig cfg_;
    int node_count_;
};

/// Picks the neighbor nearest (Euclidean) to the destination.
class GreedyModel : public StoredModel {
public:
    GreedyModel(ModelConfig cfg, int node_count) : StoredModel(std::move(cfg), node_count) {}
    std::vector<std::vector<double>> predict_batch(Batch batch) const override;
};

/// Distance-weighted vote of the k nearest training decisions, restricted to
/// those whose next node is a neighbor of the current node; falls back to
/// greedy when no neighbor gets a vote.
class KnnModel : public StoredModel {
public:
    KnnModel(ModelConfig cfg, int node_count) : StoredModel(std::move(cfg), node_count) {}
    void fit(std::span<const Sample> train) override;
    std::vector<std::vector<double>> predict_batch(Batch batch) const override;

    std::vector<nn::NamedTensor> memory() const;
    void restore(const std::vector<nn::NamedTensor>& tensors);

private:
    std::vector<double> features_;  // rows x kContextFeatures
    std::vector<int> labels_;
    std::vector<double> query(const Sample& s) const;
};

/// Weather-blind candidate scorer: an MLP over each neighbor's features,
/// the request context and one-hot neighbor/destination ids, followed by a
/// softmax across the neighbors.
class FfnnModel : public StoredModel {
public:
    FfnnModel(ModelConfig cfg, int node_count, Rng& rng);

    std::vector<std::vector<double>> predict_batch(Batch batch) const override;
    bool trainable() const override { return true; }
    nn::Tensor logits(Batch batch, bool training, Rng* rng) const override;
    std::vector<nn::NamedTensor> parameters() const override;

    int input_dim() const noexcept { return kNodeFeatures + kContextFeatures + 2 * node_count_; }

private:
    std::vector<nn::Linear> layers_;
};

/// Token inputs for one forward pass; query and memory tokens may differ in
/// number (benchmarks vary them independently).
struct TokenBatch {
    int batch = 0;
    int query_len = 0;
    int key_len = 0;
    std::vector<int> query_ids;            // batch*query_len
    std::vector<double> query_features;    // batch*query_len x kNodeFeatures
    std::vector<int> memory_ids;           // batch*key_len
    std::vector<double> memory_features;   // batch*key_len x kNodeFeatures
    std::vector<double> memory_weather;    // batch*key_len x kWeatherFeatures
    std::vector<std::uint8_t> key_mask;    // batch*key_len
};

/// Node tokens (embedding + projected features) attend to memory tokens that
/// carry the projected weather of the same nodes; a linear head scores each
/// neighbor token.
class TransformerModel : public StoredModel {
public:
    TransformerModel(ModelConfig cfg, int node_count, Rng& rng);

    std::vector<std::vector<double>> predict_batch(Batch batch) const override;
    bool trainable() const override { return true; }
    nn::Tensor logits(Batch batch, bool training, Rng* rng) const override;
    std::vector<nn::NamedTensor> parameters() const override;

    /// Per-token scores [batch*query_len, 1].
    nn::Tensor forward_tokens(const TokenBatch& tb, bool training, Rng* rng) const;
    static TokenBatch tokens(Batch batch, bool weather_aware);

    /// Snapshots the current weights into a tape-free forward pass at the
    /// given precision; predictions use it until thaw(). Freeze again after
    /// the weights change.
    void freeze(Precision p);
    void thaw() { frozen_.reset(); }
    bool is_frozen() const noexcept { return frozen_ != nullptr; }

    /// Inference-mode per-token scores, through the frozen pass when present.
    std::vector<double> score_tokens(const TokenBatch& tb) const;

    struct Frozen {
        virtual ~Frozen() = default;
        /// Scores of query rows first_row.. of each batch entry; earlier rows
        /// are left at zero. Query rows only attend to memory, so they are
        /// independent of one another.
        virtual std::vector<double> forward(const TokenBatch& tb, int first_row = 0) const = 0;
    };

private:
    std::shared_ptr<const Frozen> frozen_;

    struct Block {
        nn::MultiHeadAttention attn;
        nn::LayerNorm ln1, ln2;
        nn::Linear ff1, ff2;
    };
    nn::Embedding embed_;
    nn::Linear node_proj_;
    nn::Linear weather_proj_;
    std::vector<Block> blocks_;
    nn::Linear head_;
};

std::unique_ptr<StoredModel> make_model(const ModelConfig& cfg, int node_count, std::uint64_t seed);

/// Wraps the weather-costed A* planner as a predictor: all mass on the first
/// hop of the optimal route from the current node.
class PlannerOracle : public Model {
public:
    PlannerOracle(const skynet::Network& net, const weather::WeatherSeries& wx, flight::DroneSpec drone)
        : net_(net), wx_(wx), drone_(drone) {}
    std::string name() const override { return "astar"; }
    std::vector<std::vector<double>> predict_batch(Batch batch) const override;

private:
    const skynet::Network& net_;
    const weather::WeatherSeries& wx_;
    flight::DroneSpec drone_;
};

/// Pointers into a sample vector, the form batches are passed in.
std::vector<const Sample*> sample_ptrs(std::span<const Sample> samples);

/// Index of the largest probability (first on ties).
int argmax(std::span<const double> p);

}  // namespace skyroute::models

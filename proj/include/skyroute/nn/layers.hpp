#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "skyroute/nn/ops.hpp"
#include "skyroute/nn/tensor.hpp"
#include "skyroute/rng.hpp"

namespace skyroute::nn {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(int fan_in, int fan_out, Rng& rng);

class Linear {
public:
    Linear() = default;
    Linear(int in, int out, Rng& rng);

    Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;

    Tensor weight;  // [in, out]
    Tensor bias;    // [out]
};

class LayerNorm {
public:
    LayerNorm() = default;
    explicit LayerNorm(int dim);

    Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;

    Tensor gamma;
    Tensor beta;
};

class Embedding {
public:
    Embedding() = default;
    Embedding(int vocab, int dim, Rng& rng);

    Tensor operator()(std::span<const int> ids) const { return embedding(table, ids); }
    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;

    Tensor table;  // [vocab, dim]
};

struct AttentionConfig {
    int d_model = 128;
    int n_heads = 4;
    double dropout_p = 0.1;

    void validate() const;
    int head_dim() const { return d_model / n_heads; }
};

/// Q/K/V projections, scaled dot-product attention per head, concatenation
/// and an output projection.
class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(const AttentionConfig& cfg, Rng& rng);

    struct Call {
        int batch = 1;
        int query_len = 0;
        int key_len = 0;
        std::span<const std::uint8_t> key_mask{};
        bool training = false;
        Rng* rng = nullptr;
        std::vector<double>* weights_out = nullptr;
    };

    /// queries: [batch*query_len, d_model]; memory: [batch*key_len, d_model].
    Tensor operator()(const Tensor& queries, const Tensor& memory, const Call& call) const;
    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;

    const AttentionConfig& config() const noexcept { return cfg_; }

private:
    AttentionConfig cfg_;
    Linear q_, k_, v_, o_;
};

}  // namespace skyroute::nn

#include "skyroute/nn/layers.hpp"

#include <cmath>

namespace skyroute::nn {

Tensor xavier_uniform(int fan_in, int fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    for (double& v : w) v = rng.uniform(-a, a);
    return Tensor({fan_in, fan_out}, std::move(w), true);
}

Linear::Linear(int in, int out, Rng& rng)
    : weight(xavier_uniform(in, out, rng)), bias(Tensor::zeros({out}, true)) {}

void Linear::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

LayerNorm::LayerNorm(int dim)
    : gamma(Tensor({dim}, std::vector<double>(static_cast<std::size_t>(dim), 1.0), true)),
      beta(Tensor::zeros({dim}, true)) {}

void LayerNorm::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

Embedding::Embedding(int vocab, int dim, Rng& rng) : table(xavier_uniform(vocab, dim, rng)) {}

void Embedding::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
    out.push_back({prefix + ".table", table});
}

void AttentionConfig::validate() const {
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) {
        throw ShapeMismatch("d_model must be a positive multiple of n_heads");
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw std::invalid_argument("dropout_p must lie in [0, 1)");
}

MultiHeadAttention::MultiHeadAttention(const AttentionConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    q_ = Linear(cfg.d_model, cfg.d_model, rng);
    k_ = Linear(cfg.d_model, cfg.d_model, rng);
    v_ = Linear(cfg.d_model, cfg.d_model, rng);
    o_ = Linear(cfg.d_model, cfg.d_model, rng);
}

Tensor MultiHeadAttention::operator()(const Tensor& queries, const Tensor& memory, const Call& call) const {
    AttentionOptions opt;
    opt.batch = call.batch;
    opt.query_len = call.query_len;
    opt.key_len = call.key_len;
    opt.heads = cfg_.n_heads;
    opt.key_mask = call.key_mask;
    opt.dropout_p = cfg_.dropout_p;
    opt.training = call.training;
    opt.rng = call.rng;
    opt.weights_out = call.weights_out;
    const Tensor heads = attention(q_(queries), k_(memory), v_(memory), opt);
    return o_(heads);
}

void MultiHeadAttention::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
    q_.collect(prefix + ".q", out);
    k_.collect(prefix + ".k", out);
    v_.collect(prefix + ".v", out);
    o_.collect(prefix + ".o", out);
}

}  // namespace skyroute::nn

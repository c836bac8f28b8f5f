#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "skyroute/nn/tensor.hpp"
#include "skyroute/rng.hpp"

namespace skyroute::nn {

/// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

/// x[m,in] * w[in,out] + b[out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Sum of all elements, shape [1].
Tensor sum(const Tensor& x);

/// Row-wise layer normalisation with affine gamma/beta over the last dim.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Inverted dropout. Identity when !training or p == 0.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

/// Rows of `table` selected by ids -> [ids.size(), table.cols()].
Tensor embedding(const Tensor& table, std::span<const int> ids);

/// Same data, new shape (element count must match).
Tensor reshape(const Tensor& x, Shape shape);

/// Columns [start, start+count) of a matrix.
Tensor slice_cols(const Tensor& x, int start, int count);

/// Row-wise softmax over valid entries; invalid entries get probability 0.
/// mask is row-major [rows, cols] with 1 = valid (empty span = all valid).
std::vector<double> masked_softmax_rows(std::span<const double> logits, int rows, int cols,
                                        std::span<const std::uint8_t> mask = {});

struct AttentionOptions {
    int batch = 1;
    int query_len = 0;
    int key_len = 0;
    int heads = 1;
    /// [batch * key_len], 1 = key may be attended. Empty = all valid.
    std::span<const std::uint8_t> key_mask{};
    double dropout_p = 0.0;
    bool training = false;
    Rng* rng = nullptr;
    /// When set, receives the softmax weights [batch, heads, query_len, key_len]
    /// (before dropout).
    std::vector<double>* weights_out = nullptr;
};

/// Scaled dot-product attention over `heads` slices of the model dimension:
/// per sequence and head, softmax(Q K^T / sqrt(d_head)) V, with heads written
/// back side by side. q: [batch*query_len, d]; k, v: [batch*key_len, d].
/// Throws ShapeMismatch.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionOptions& opt);

}  // namespace skyroute::nn

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "skyroute/nn/tensor.hpp"

namespace skyroute::nn {

/// lambda scales the weather penalty; weather_weights[i] weighs severity
/// channel i. lambda = 0 gives plain cross-entropy.
struct LossConfig {
    double lambda = 0.0;
    std::vector<double> weather_weights{1.0, 1.0, 0.0, 0.0};

    void validate() const;
};

struct LossInputs {
    int batch = 0;
    int classes = 0;
    /// [batch*classes], 1 = class is a legal choice. Empty = all legal.
    std::span<const std::uint8_t> mask{};
    /// [batch], index of the target class.
    std::span<const int> targets{};
    /// [batch*classes*channels] severity of the edge each class would take;
    /// may be empty when lambda == 0.
    std::span<const double> severity{};
};

/// Mean over the batch of
///   -log p_target + lambda * sum_c p_c * sum_i w_i * severity_i(c),
/// with p the masked softmax of the logits. The penalty is the expected
/// severity of the chosen edge, so it is differentiable in the logits.
/// Throws ShapeMismatch on inconsistent inputs.
Tensor weather_penalized_cross_entropy(const Tensor& logits, const LossInputs& in, const LossConfig& cfg);

}  // namespace skyroute::nn

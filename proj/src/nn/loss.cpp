#include "skyroute/nn/loss.hpp"

#include <cmath>

#include "skyroute/nn/ops.hpp"

namespace skyroute::nn {

void LossConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
    for (double w : weather_weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weather weights must be finite and >= 0");
    }
}

Tensor weather_penalized_cross_entropy(const Tensor& logits, const LossInputs& in, const LossConfig& cfg) {
    cfg.validate();
    const int B = in.batch, C = in.classes;
    if (B < 1 || C < 1) throw ShapeMismatch("loss: empty batch");
    if (logits.numel() != static_cast<std::size_t>(B) * C) {
        throw ShapeMismatch("loss: logits " + shape_str(logits.shape()) + " vs batch " + std::to_string(B) + "x" +
                            std::to_string(C));
    }
    if (in.targets.size() != static_cast<std::size_t>(B)) throw ShapeMismatch("loss: target count");
    if (!in.mask.empty() && in.mask.size() != static_cast<std::size_t>(B) * C) throw ShapeMismatch("loss: mask size");
    const std::size_t channels = cfg.weather_weights.size();
    const bool penalized = cfg.lambda > 0.0;
    if (penalized && in.severity.size() != static_cast<std::size_t>(B) * C * channels) {
        throw ShapeMismatch("loss: severity must be [batch, classes, " + std::to_string(channels) + "]");
    }

    const auto p = masked_softmax_rows(logits.data(), B, C, in.mask);
    std::vector<double> s(static_cast<std::size_t>(B) * C, 0.0);  // weighted severity per class
    if (penalized) {
        for (std::size_t bc = 0; bc < s.size(); ++bc) {
            for (std::size_t i = 0; i < channels; ++i) s[bc] += cfg.weather_weights[i] * in.severity[bc * channels + i];
        }
    }

    double total = 0.0;
    std::vector<double> expected(static_cast<std::size_t>(B), 0.0);
    for (int b = 0; b < B; ++b) {
        const int t = in.targets[b];
        const std::size_t base = static_cast<std::size_t>(b) * C;
        if (t < 0 || t >= C || (!in.mask.empty() && !in.mask[base + t])) {
            throw ShapeMismatch("loss: target " + std::to_string(t) + " is not a legal class in row " + std::to_string(b));
        }
        total += -std::log(std::max(p[base + t], 1e-300));
        if (penalized) {
            for (int c = 0; c < C; ++c) expected[b] += p[base + c] * s[base + c];
            total += cfg.lambda * expected[b];
        }
    }
    total /= B;

    std::vector<int> targets(in.targets.begin(), in.targets.end());
    const double lambda = cfg.lambda;
    return make_result({1}, {total}, {logits},
                       [B, C, p, s = std::move(s), expected = std::move(expected), targets = std::move(targets),
                        lambda, penalized](detail::TensorNode& self) {
                           auto& g = self.parents[0]->grad_buffer();
                           const double scale = self.grad[0] / B;
                           for (int b = 0; b < B; ++b) {
                               const std::size_t base = static_cast<std::size_t>(b) * C;
                               for (int c = 0; c < C; ++c) {
                                   const double pc = p[base + c];
                                   double d = pc - (c == targets[b] ? 1.0 : 0.0);
                                   if (penalized) d += lambda * pc * (s[base + c] - expected[b]);
                                   g[base + c] += scale * d;
                               }
                           }
                       });
}

}  // namespace skyroute::nn

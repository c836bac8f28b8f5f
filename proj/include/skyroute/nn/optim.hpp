#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "skyroute/nn/tensor.hpp"

namespace skyroute::nn {

struct OptimConfig {
    double lr = 0.0005;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0;

    void validate() const;
};

struct ScheduleConfig {
    int warmup_steps = 100;
    int total_steps = 1000;

    void validate() const;
};

/// Linear warmup to 1 over warmup_steps, then half-cosine decay to 0 at
/// total_steps. Requires 0 <= step <= total_steps.
double lr_factor(int step, const ScheduleConfig& sched);

class NonFiniteGradient : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AdamWState {
    std::vector<double> m;
    std::vector<double> v;
};

/// One AdamW update of a flat parameter block at step t (t >= 1) with learning
/// rate lr: decoupled decay param *= (1 - lr*wd), then the bias-corrected
/// Adam step. Throws NonFiniteGradient before touching anything if a gradient
/// is NaN or infinite.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state, long t, double lr,
                const OptimConfig& cfg);

/// Scales all gradients so their global L2 norm is at most max_norm; returns
/// the factor applied (1 when no clipping happened).
double clip_grad_norm(std::span<const std::span<double>> grads, double max_norm);
double clip_grad_norm(std::vector<Tensor>& params, double max_norm);

/// AdamW over a fixed list of parameter tensors.
class AdamW {
public:
    AdamW(std::vector<Tensor> params, OptimConfig cfg);

    /// Applies one update with learning rate cfg.lr * lr_scale.
    void step(double lr_scale = 1.0);
    void zero_grad();
    long step_count() const noexcept { return t_; }
    const OptimConfig& config() const noexcept { return cfg_; }

private:
    std::vector<Tensor> params_;
    std::vector<AdamWState> state_;
    OptimConfig cfg_;
    long t_ = 0;
};

}  // namespace skyroute::nn

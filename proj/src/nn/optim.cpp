#include "skyroute/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace skyroute::nn {

void OptimConfig::validate() const {
    if (!(lr > 0.0) || !(weight_decay >= 0.0) || !(eps > 0.0) || !(clip_norm > 0.0)) {
        throw std::invalid_argument("optimizer hyperparameters must be positive");
    }
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("betas must lie in (0, 1)");
    }
}

void ScheduleConfig::validate() const {
    if (!(warmup_steps > 0 && warmup_steps < total_steps)) {
        throw std::invalid_argument("schedule needs 0 < warmup_steps < total_steps");
    }
}

double lr_factor(int step, const ScheduleConfig& sched) {
    if (step < 0 || step > sched.total_steps) throw std::invalid_argument("step outside [0, total_steps]");
    if (step < sched.warmup_steps) {
        return static_cast<double>(step) / static_cast<double>(std::max(1, sched.warmup_steps));
    }
    return 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step - sched.warmup_steps) /
                                 static_cast<double>(sched.total_steps - sched.warmup_steps)));
}

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state, long t, double lr,
                const OptimConfig& cfg) {
    if (params.size() != grads.size()) throw std::invalid_argument("adamw parameter/gradient size mismatch");
    if (t < 1) throw std::invalid_argument("adamw step index must be >= 1");
    for (double g : grads) {
        if (!std::isfinite(g)) throw NonFiniteGradient("non-finite gradient; step aborted");
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    const double decay = 1.0 - lr * cfg.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] *= decay;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

double clip_grad_norm(std::span<const std::span<double>> grads, double max_norm) {
    if (!(max_norm > 0.0)) throw std::invalid_argument("max_norm must be positive");
    double sq = 0.0;
    for (auto g : grads) {
        for (double v : g) sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (!(norm > max_norm)) return 1.0;
    const double s = max_norm / norm;
    for (auto g : grads) {
        for (double& v : g) v *= s;
    }
    return s;
}

double clip_grad_norm(std::vector<Tensor>& params, double max_norm) {
    std::vector<std::span<double>> grads;
    grads.reserve(params.size());
    for (auto& p : params) grads.push_back(p.grad());
    return clip_grad_norm(std::span<const std::span<double>>(grads), max_norm);
}

AdamW::AdamW(std::vector<Tensor> params, OptimConfig cfg)
    : params_(std::move(params)), state_(params_.size()), cfg_(cfg) {
    cfg_.validate();
}

void AdamW::step(double lr_scale) {
    for (auto& p : params_) {
        for (double g : p.grad()) {
            if (!std::isfinite(g)) throw NonFiniteGradient("non-finite gradient; step aborted");
        }
    }
    ++t_;
    const double lr = cfg_.lr * lr_scale;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        adamw_step(params_[i].data(), params_[i].grad(), state_[i], t_, lr, cfg_);
    }
}

void AdamW::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace skyroute::nn

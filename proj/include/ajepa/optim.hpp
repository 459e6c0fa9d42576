#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "ajepa/tensor.hpp"

namespace ajepa {

struct OptimizerConfig {
    double beta1 = 0.9;
    double beta2 = 0.95;
    double weight_decay = 0.05;
    double eps = 1e-8;
    double peak_lr = 3e-4;
    double init_lr = 1e-6;
    uint64_t warmup_steps = 1000;
    uint64_t total_steps = 100000;
    double tau_base = 0.996;

    void validate() const {
        if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
            throw Error("optimizer config: betas must lie in (0, 1)");
        if (eps <= 0.0) throw Error("optimizer config: eps must be positive");
        if (weight_decay < 0.0) throw Error("optimizer config: weight_decay must be >= 0");
        if (peak_lr <= 0.0 || init_lr < 0.0)
            throw Error("optimizer config: learning rates must be positive");
        if (warmup_steps >= total_steps)
            throw Error("optimizer config: warmup_steps must be < total_steps");
        if (tau_base < 0.0 || tau_base > 1.0)
            throw Error("optimizer config: tau_base must lie in [0, 1]");
    }
};

// Linear warmup init_lr -> peak_lr over warmup_steps, then cosine decay to
// zero at total_steps.
inline double lr_schedule(uint64_t step, const OptimizerConfig& cfg) {
    if (step <= cfg.warmup_steps) {
        const double frac = cfg.warmup_steps == 0
                                ? 1.0
                                : static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
        return cfg.init_lr + (cfg.peak_lr - cfg.init_lr) * frac;
    }
    const uint64_t s = std::min(step, cfg.total_steps) - cfg.warmup_steps;
    const uint64_t span = cfg.total_steps - cfg.warmup_steps;
    const double progress = static_cast<double>(s) / static_cast<double>(span);
    return cfg.peak_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

// BYOL-style EMA decay ramp: tau(step) rises from tau_base to 1 along a
// cosine, tau(s) = 1 - (1 - tau_base) * (cos(pi * s / total) + 1) / 2.
inline double tau_schedule(uint64_t step, uint64_t total_steps, double tau_base) {
    if (total_steps == 0) return 1.0;
    const double progress =
        static_cast<double>(std::min(step, total_steps)) / static_cast<double>(total_steps);
    return 1.0 - (1.0 - tau_base) *
                     (std::cos(3.14159265358979323846 * progress) + 1.0) / 2.0;
}

// theta_tgt <- tau * theta_tgt + (1 - tau) * theta_ctx, element-wise.
template <typename T>
void ema_update(Tensor<T>& tgt, const Tensor<T>& ctx, double tau) {
    if (!tgt.same_shape(ctx))
        throw ShapeMismatchError("ema_update: tensor shape mismatch");
    if (tau < 0.0 || tau > 1.0) throw Error("ema_update: tau must lie in [0, 1]");
    const T a = static_cast<T>(tau);
    const T b = static_cast<T>(1.0 - tau);
    for (size_t i = 0; i < tgt.size(); ++i) tgt[i] = a * tgt[i] + b * ctx[i];
}

template <typename T>
void ema_update(ParameterSet<T>& tgt, const ParameterSet<T>& ctx, double tau) {
    if (tgt.size() != ctx.size())
        throw ShapeMismatchError("ema_update: parameter sets differ in entry count");
    for (size_t i = 0; i < tgt.entries.size(); ++i) {
        if (tgt.entries[i].name != ctx.entries[i].name)
            throw ShapeMismatchError("ema_update: parameter name mismatch at entry " +
                                     std::to_string(i));
        ema_update(tgt.entries[i].tensor, ctx.entries[i].tensor, tau);
    }
}

// Weight matrices decay; biases, layer-norm parameters and the mask token
// do not.
inline bool weight_decay_applies(const std::string& name) {
    return name.ends_with(".weight");
}

// One AdamW update on a single tensor: decoupled weight decay applied
// directly to the parameter, then the bias-corrected adaptive step.
// `t` is the 1-based update count.
template <typename T>
void adamw_update_tensor(const std::string& name, Tensor<T>& param, const Tensor<T>& grad,
                         Tensor<T>& m, Tensor<T>& v, uint64_t t, double lr,
                         const OptimizerConfig& cfg) {
    if (!param.same_shape(grad) || !param.same_shape(m) || !param.same_shape(v))
        throw ShapeMismatchError("adamw: shape mismatch for " + name);
    for (size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(static_cast<double>(grad[i])))
            throw Error("adamw: non-finite gradient in " + name);
    }
    const bool decay = weight_decay_applies(name);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (size_t i = 0; i < param.size(); ++i) {
        if (decay) param[i] -= static_cast<T>(lr * cfg.weight_decay) * param[i];
        m[i] = static_cast<T>(cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i]);
        v[i] = static_cast<T>(cfg.beta2 * v[i] +
                              (1.0 - cfg.beta2) * static_cast<double>(grad[i]) * grad[i]);
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        param[i] -= static_cast<T>(lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
    }
}

}  // namespace ajepa

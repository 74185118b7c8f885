#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "foar/core/nn.hpp"

namespace foar::core {

struct TrainConfig {
    double base_lr = 3e-4;
    std::size_t warmup_steps = 2000;
    std::size_t total_steps = 20000;
    std::size_t batch_size = 240;
    double alpha = 0.1;  // predictor loss weight
    std::string precision = "f32";
    std::uint64_t seed = 0;
    bool augment = true;

    void validate() const {
        if (alpha < 0) throw TrainingError("TrainConfig: alpha must be >= 0");
        if (warmup_steps > total_steps)
            throw TrainingError("TrainConfig: warmup_steps must be <= total_steps");
        if (precision != "f32" && precision != "f64")
            throw TrainingError("TrainConfig: precision must be f32 or f64");
    }
};

/// Linear warmup to base_lr, then cosine decay to zero at total_steps.
inline double lr_at_step(const TrainConfig& cfg, std::size_t step) {
    if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
        return cfg.base_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    if (cfg.total_steps <= cfg.warmup_steps) return step >= cfg.total_steps ? 0.0 : cfg.base_lr;
    double progress = static_cast<double>(step - cfg.warmup_steps) /
                      static_cast<double>(cfg.total_steps - cfg.warmup_steps);
    return cfg.base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

/// Adaptive-moment optimizer state (beta1=0.9, beta2=0.999, eps=1e-8).
template <class S>
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments;
};

template <class S>
void optimizer_step(AdamState<S>& state, ParamStore<S>& params, double lr) {
    ++state.step;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (auto& [name, p] : params) {
        if (p.grad().size() != p.numel())
            throw TrainingError("optimizer_step: gradient missing for " + name);
        auto& [m, v] = state.moments[name];
        if (m.size() != p.numel()) {
            m.assign(p.numel(), 0.0);
            v.assign(p.numel(), 0.0);
        }
        auto& vals = p.value_mut();
        const auto& grads = p.grad();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            double g = static_cast<double>(grads[i]);
            if (!std::isfinite(g))
                throw TrainingError("optimizer_step: non-finite gradient in " + name);
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            double update = lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + state.eps);
            vals[i] = static_cast<S>(static_cast<double>(vals[i]) - update);
        }
    }
}

}  // namespace foar::core

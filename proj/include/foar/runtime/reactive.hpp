#pragma once

#include "foar/io/json_config.hpp"
#include "foar/runtime/ensemble.hpp"
#include "foar/sim/types.hpp"

namespace foar::runtime {

struct ReactiveThresholds {
    double delta_phi = 0.9;  // contact probability threshold
    double delta_f = 8.0;    // N, on ||f||
    double delta_t = 5.0;    // N*m, on ||tau||
    double epsilon = 0.006;  // m, correction step
    std::size_t t_f = 5;     // action steps used for the motion direction

    void validate() const {
        if (delta_phi <= 0 || delta_phi >= 1)
            throw std::runtime_error("ReactiveThresholds: delta_phi must be in (0,1)");
        if (epsilon <= 0) throw std::runtime_error("ReactiveThresholds: epsilon must be > 0");
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ReactiveThresholds, delta_phi, delta_f,
                                                delta_t, epsilon, t_f)

struct RuntimeConfig {
    long n_max = 400;           // ticks per rollout
    long n_inference = 10;      // inference period in ticks
    double control_period = 0.1;  // s
    double ensemble_decay = 0.25;  // m in w_k = exp(-m k)

    void validate() const {
        if (n_inference < 1 || n_max < 1)
            throw std::runtime_error("RuntimeConfig: n_inference and n_max must be >= 1");
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RuntimeConfig, n_max, n_inference,
                                                control_period, ensemble_decay)

struct CorrectionResult {
    ActionChunk chunk;
    bool corrected = false;
};

/// Insufficient-force action correction: when both sensed norms are under
/// their thresholds, every position in the chunk is nudged by epsilon along
/// the mean direction of the next t_f predicted steps.
inline CorrectionResult correct_actions(const ActionChunk& chunk, const Pose& q_t,
                                        const sim::FtSample& f_t,
                                        const ReactiveThresholds& thr) {
    CorrectionResult result{chunk, false};
    if (chunk.empty()) return result;
    if (f_t.force_norm() >= thr.delta_f || f_t.torque_norm() >= thr.delta_t) return result;

    std::size_t n = std::min<std::size_t>(thr.t_f, chunk.size());
    Vec3 mean{0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) mean += chunk[i].pose.pos;
    mean = mean * (1.0 / static_cast<double>(n));
    Vec3 d = mean - q_t.pos;
    double norm = d.norm();
    if (norm < 1e-9) return result;  // degenerate direction

    Vec3 step = d * (thr.epsilon / norm);
    for (auto& a : result.chunk) a.pose.pos += step;
    result.corrected = true;
    return result;
}

}  // namespace foar::runtime

#pragma once

#include <vector>

#include "foar/io/json_config.hpp"
#include "foar/sim/types.hpp"

namespace foar::data {

/// Demo-side contact thresholds; label(t) = 1 iff some sample within
/// [t - window_s, t + window_s] (clipped to the stream) exceeds either norm.
struct LabelConfig {
    double delta_demo_force = 2.0;   // N, on ||f||
    double delta_demo_torque = 0.5;  // N*m, on ||tau||
    double window_s = 2.0;

    void validate() const {
        if (delta_demo_force <= 0 || delta_demo_torque <= 0 || window_s <= 0)
            throw std::runtime_error("LabelConfig: thresholds and window must be > 0");
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LabelConfig, delta_demo_force,
                                                delta_demo_torque, window_s)

inline std::vector<std::uint8_t> extract_contact_labels(
    const std::vector<sim::FtSample>& ft, const LabelConfig& cfg,
    const std::vector<double>& tick_times) {
    if (ft.empty()) throw std::runtime_error("extract_contact_labels: empty F/T stream");
    cfg.validate();

    // Hot samples, then a sliding window over the sorted stream per tick.
    std::vector<std::uint8_t> hot(ft.size());
    for (std::size_t i = 0; i < ft.size(); ++i)
        hot[i] = (ft[i].force_norm() > cfg.delta_demo_force ||
                  ft[i].torque_norm() > cfg.delta_demo_torque)
                     ? 1
                     : 0;
    // prefix counts of hot samples for O(1) window queries
    std::vector<std::size_t> prefix(ft.size() + 1, 0);
    for (std::size_t i = 0; i < ft.size(); ++i)
        prefix[i + 1] = prefix[i] + hot[i];

    std::vector<std::uint8_t> labels(tick_times.size());
    for (std::size_t k = 0; k < tick_times.size(); ++k) {
        double lo = tick_times[k] - cfg.window_s;
        double hi = tick_times[k] + cfg.window_s;
        auto lo_it = std::lower_bound(ft.begin(), ft.end(), lo,
                                      [](const sim::FtSample& s, double v) { return s.t < v; });
        auto hi_it = std::upper_bound(ft.begin(), ft.end(), hi,
                                      [](double v, const sim::FtSample& s) { return v < s.t; });
        std::size_t a = static_cast<std::size_t>(lo_it - ft.begin());
        std::size_t b = static_cast<std::size_t>(hi_it - ft.begin());
        labels[k] = prefix[b] > prefix[a] ? 1 : 0;
    }
    return labels;
}

}  // namespace foar::data

#pragma once

#include <map>
#include <optional>
#include <vector>

#include "foar/geometry.hpp"

namespace foar::runtime {

struct EnsembleEntry {
    Action action;
    std::size_t batch = 0;  // insertion batch, higher = newer
};

/// Per-timestep overlapping predictions; entries are immutable once added
/// and the buffer only grows at inference ticks.
class EnsembleBuffer {
public:
    void clear() {
        slots_.clear();
        next_batch_ = 0;
    }

    std::size_t add_batch() { return next_batch_++; }

    void add_entry(long t, const Action& a, std::size_t batch) {
        slots_[t].push_back({a, batch});
    }

    bool has(long t) const {
        auto it = slots_.find(t);
        return it != slots_.end() && !it->second.empty();
    }

    const std::vector<EnsembleEntry>* entries(long t) const {
        auto it = slots_.find(t);
        return it == slots_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return slots_.size(); }

private:
    std::map<long, std::vector<EnsembleEntry>> slots_;
    std::size_t next_batch_ = 0;
};

/// Action i of the chunk lands at timestep t0 + i under one insertion batch.
inline void buffer_add(EnsembleBuffer& buf, const ActionChunk& chunk, long t0) {
    std::size_t batch = buf.add_batch();
    for (std::size_t i = 0; i < chunk.size(); ++i)
        buf.add_entry(t0 + static_cast<long>(i), chunk[i], batch);
}

/// Age-weighted blend: w_k = exp(-m * k) with k = 0 for the newest entry.
/// Positions and width are weighted means; orientation is the normalized
/// weighted quaternion sum, sign-aligned to the newest entry.
inline std::optional<Action> ensemble_get(const EnsembleBuffer& buf, long t, double m) {
    const auto* entries = buf.entries(t);
    if (!entries || entries->empty()) return std::nullopt;  // caller falls back

    // age rank by insertion batch, newest first
    std::vector<const EnsembleEntry*> ordered;
    ordered.reserve(entries->size());
    for (const auto& e : *entries) ordered.push_back(&e);
    std::sort(ordered.begin(), ordered.end(),
              [](const EnsembleEntry* a, const EnsembleEntry* b) { return a->batch > b->batch; });

    double wsum = 0;
    Vec3 pos{0, 0, 0};
    double width = 0;
    Quat ref = ordered.front()->action.pose.orn;
    double qw = 0, qx = 0, qy = 0, qz = 0;
    for (std::size_t k = 0; k < ordered.size(); ++k) {
        double w = std::exp(-m * static_cast<double>(k));
        const Action& a = ordered[k]->action;
        wsum += w;
        pos += a.pose.pos * w;
        width += w * a.width;
        Quat q = a.pose.orn;
        double sign = q.dot(ref) < 0 ? -1.0 : 1.0;
        qw += w * sign * q.w;
        qx += w * sign * q.x;
        qy += w * sign * q.y;
        qz += w * sign * q.z;
    }
    Action out;
    out.pose.pos = pos * (1.0 / wsum);
    out.width = width / wsum;
    out.pose.orn = Quat{qw, qx, qy, qz}.normalized();
    return out;
}

}  // namespace foar::runtime

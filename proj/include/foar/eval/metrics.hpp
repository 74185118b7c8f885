#pragma once

#include "foar/sim/world.hpp"

namespace foar::eval {

struct WipeScore {
    double coverage = 0.0;
    double score = 0.0;  // 1 full, 0.5 partial, 0 none
};

/// Discrete wiping score from coverage: 1 at >= 0.95, 0.5 at >= 0.2, else 0.
inline WipeScore wiping_score(const sim::SimWorld& world) {
    WipeScore s;
    s.coverage = world.task_metrics().coverage;
    s.score = s.coverage >= 0.95 ? 1.0 : (s.coverage >= 0.2 ? 0.5 : 0.0);
    return s;
}

struct AsrEvents {
    bool grasp = false;
    bool operate = false;
    bool place = false;
};

/// Binary action requirements, independent of quality.
inline AsrEvents asr_events(const sim::SimState& state) {
    AsrEvents e;
    e.grasp = state.stats.ever_attached;
    e.operate = state.task == sim::Task::SurfaceWipe ? state.stats.erase_events > 0
                                                     : state.stats.cut_events > 0;
    e.place = state.stats.released_in_zone;
    return e;
}

struct SegmentStats {
    int count = 0;
    double mean = 0.0;
    double stddev = 0.0;
};

inline SegmentStats segment_stats(const sim::SimWorld& world) {
    auto m = world.task_metrics();
    return {m.segment_count, m.segment_mean, m.segment_std};
}

}  // namespace foar::eval

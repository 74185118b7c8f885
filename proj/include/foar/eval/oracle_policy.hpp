#pragma once

#include "foar/runtime/control_loop.hpp"
#include "foar/sim/expert.hpp"

namespace foar::eval {

/// Chunk policy backed by the scripted expert: at every inference it branches
/// a copy of the live world, rolls the expert T_a ticks ahead to produce the
/// chunk, and reports phi = 1 in contact phases. Useful as a privileged
/// upper-baseline and for exercising the harness without training.
class OracleChunkPolicy {
public:
    OracleChunkPolicy(sim::SimWorld& world, std::size_t t_a, long n_inference,
                      std::uint64_t seed)
        : world_(world),
          expert_(world.config(), world.state().task, seed),
          t_a_(t_a),
          n_inference_(n_inference) {}

    std::pair<double, ActionChunk> operator()(const runtime::Observation&) {
        double phi = expert_.in_contact_phase() ? 1.0 : 0.0;
        double dt = world_.config().control_period;

        sim::SimWorld branch = world_;
        sim::ScriptedExpert rollout_expert = expert_;
        ActionChunk chunk;
        std::vector<sim::FtSample> last;
        for (std::size_t i = 0; i < t_a_; ++i) {
            Action a = rollout_expert.next_action(branch.state(), last);
            chunk.push_back(a);
            last = branch.step(a, dt);
        }
        // advance the persistent expert along its own plan for one period
        sim::SimWorld shadow = world_;
        std::vector<sim::FtSample> shadow_last;
        for (long i = 0; i < n_inference_; ++i) {
            Action a = expert_.next_action(shadow.state(), shadow_last);
            shadow_last = shadow.step(a, dt);
        }
        return {phi, chunk};
    }

    bool done() const { return expert_.done(); }

private:
    sim::SimWorld& world_;
    sim::ScriptedExpert expert_;
    std::size_t t_a_;
    long n_inference_;
};

}  // namespace foar::eval

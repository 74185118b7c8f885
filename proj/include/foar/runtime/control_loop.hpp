#pragma once

#include <deque>
#include <functional>

#include "foar/data/dataset.hpp"
#include "foar/runtime/reactive.hpp"
#include "foar/sim/world.hpp"

namespace foar::runtime {

/// What the agent perceives at an inference tick.
struct Observation {
    data::TrainingSample sample;  // normalized cloud/image/F-T window/proprio
    Pose ee_pose;                 // raw meters
    double gripper_width = 0.0;
    sim::FtSample latest_ft;
};

/// Environment surface consumed by the control loop; implemented by the
/// simulator adapter and by test stubs/replays.
class ControlEnv {
public:
    virtual ~ControlEnv() = default;
    virtual Observation observe() = 0;
    virtual sim::FtSample latest_ft() const = 0;
    virtual Action hold_action() const = 0;
    virtual void execute(const Action& a) = 0;
};

using PolicyFn = std::function<std::pair<double, ActionChunk>(const Observation&)>;

enum class BufferChoice { Contact, NonContact, Fallback, Hold };

inline const char* buffer_choice_name(BufferChoice c) {
    switch (c) {
        case BufferChoice::Contact: return "contact";
        case BufferChoice::NonContact: return "noncontact";
        case BufferChoice::Fallback: return "fallback";
        case BufferChoice::Hold: return "hold";
    }
    return "?";
}

struct TickLog {
    long t = 0;
    double phi = 0;
    BufferChoice choice = BufferChoice::Hold;
    bool correction = false;
    double f_norm = 0, tau_norm = 0;
    Action executed;
};

struct RolloutLog {
    std::vector<TickLog> ticks;
    long inference_count = 0;
    long correction_count = 0;
    bool aborted = false;
    std::string abort_reason;

    void write_csv(const std::string& path) const {
        std::ofstream os(path);
        os << "t,phi,buffer_choice,correction,f_norm,tau_norm,x,y,z,qw,qx,qy,qz,width\n";
        char row[320];
        for (const auto& tk : ticks) {
            std::snprintf(row, sizeof row,
                          "%ld,%.9e,%s,%d,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e\n",
                          tk.t, tk.phi, buffer_choice_name(tk.choice), tk.correction ? 1 : 0,
                          tk.f_norm, tk.tau_norm, tk.executed.pose.pos.x,
                          tk.executed.pose.pos.y, tk.executed.pose.pos.z,
                          tk.executed.pose.orn.w, tk.executed.pose.orn.x,
                          tk.executed.pose.orn.y, tk.executed.pose.orn.z, tk.executed.width);
            os << row;
        }
    }
};

struct ControlLoopOptions {
    bool no_reactive = false;
    // invoked after each executed tick (disturbance injection, tracing)
    std::function<void(long tick, const TickLog&)> tick_hook;
};

/// Periodic inference with contact-thresholded buffer routing, reactive
/// correction, and dual temporal-ensemble execution; stale phi routes the
/// ticks between inferences.
inline RolloutLog control_loop(ControlEnv& env, const PolicyFn& policy,
                               const RuntimeConfig& cfg, const ReactiveThresholds& thr,
                               const ControlLoopOptions& opts = {}) {
    cfg.validate();
    thr.validate();
    EnsembleBuffer buffer;          // non-contact
    EnsembleBuffer contact_buffer;  // contact
    RolloutLog log;
    double phi = 0.0;

    for (long t = 0; t < cfg.n_max; ++t) {
        bool corrected_now = false;
        if (t % cfg.n_inference == 0) {
            Observation obs;
            ActionChunk chunk;
            try {
                obs = env.observe();
                auto out = policy(obs);
                phi = out.first;
                chunk = std::move(out.second);
            } catch (const std::exception& e) {
                log.aborted = true;
                log.abort_reason = e.what();
                return log;
            }
            ++log.inference_count;
            if (phi < thr.delta_phi) {
                buffer_add(buffer, chunk, t);
            } else {
                if (!opts.no_reactive) {
                    auto corr = correct_actions(chunk, obs.ee_pose, obs.latest_ft, thr);
                    corrected_now = corr.corrected;
                    if (corrected_now) ++log.correction_count;
                    buffer_add(contact_buffer, corr.chunk, t);
                } else {
                    buffer_add(contact_buffer, chunk, t);
                }
            }
        }

        EnsembleBuffer& primary = phi >= thr.delta_phi ? contact_buffer : buffer;
        EnsembleBuffer& other = phi >= thr.delta_phi ? buffer : contact_buffer;
        TickLog tk;
        tk.t = t;
        tk.phi = phi;
        tk.correction = corrected_now;
        if (auto a = ensemble_get(primary, t, cfg.ensemble_decay)) {
            tk.choice = phi >= thr.delta_phi ? BufferChoice::Contact : BufferChoice::NonContact;
            tk.executed = *a;
        } else if (auto b = ensemble_get(other, t, cfg.ensemble_decay)) {
            tk.choice = BufferChoice::Fallback;
            tk.executed = *b;
        } else {
            tk.choice = BufferChoice::Hold;
            tk.executed = env.hold_action();
        }
        env.execute(tk.executed);
        sim::FtSample ft = env.latest_ft();
        tk.f_norm = ft.force_norm();
        tk.tau_norm = ft.torque_norm();
        log.ticks.push_back(tk);
        if (opts.tick_hook) opts.tick_hook(t, tk);
    }
    return log;
}

/// Simulator adapter: settles for T_o samples of F/T history before the
/// first observation so every window is full.
class SimEnv : public ControlEnv {
public:
    SimEnv(sim::SimWorld& world, std::size_t t_o)
        : world_(world), norm_(world.config()), t_o_(t_o) {}

    void settle() {
        Action hold = hold_action();
        std::size_t ticks = (t_o_ + 9) / 10 + 1;
        for (std::size_t i = 0; i < ticks; ++i) push_samples(world_.step(hold, dt()));
    }

    Observation observe() override {
        Observation obs;
        const auto& s = world_.state();
        obs.ee_pose = s.ee;
        obs.gripper_width = s.gripper_width;
        obs.latest_ft = history_.empty() ? sim::FtSample{} : history_.back();

        data::TrainingSample raw;
        raw.t_o = t_o_;
        auto pc = world_.render_pointcloud();
        raw.cloud = pc.data;
        raw.image = world_.render_image();
        raw.ft_window.resize(t_o_ * 6);
        for (std::size_t k = 0; k < t_o_; ++k) {
            std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(history_.size()) -
                                 static_cast<std::ptrdiff_t>(t_o_) +
                                 static_cast<std::ptrdiff_t>(k);
            const sim::FtSample& smp =
                history_.empty()
                    ? sim::FtSample{}
                    : history_[idx < 0 ? 0 : static_cast<std::size_t>(idx)];
            float* row = raw.ft_window.data() + k * 6;
            row[0] = static_cast<float>(smp.f.x);
            row[1] = static_cast<float>(smp.f.y);
            row[2] = static_cast<float>(smp.f.z);
            row[3] = static_cast<float>(smp.tau.x);
            row[4] = static_cast<float>(smp.tau.y);
            row[5] = static_cast<float>(smp.tau.z);
        }
        raw.proprio[0] = static_cast<float>(s.ee.pos.x);
        raw.proprio[1] = static_cast<float>(s.ee.pos.y);
        raw.proprio[2] = static_cast<float>(s.ee.pos.z);
        raw.proprio[3] = static_cast<float>(s.ee.orn.w);
        raw.proprio[4] = static_cast<float>(s.ee.orn.x);
        raw.proprio[5] = static_cast<float>(s.ee.orn.y);
        raw.proprio[6] = static_cast<float>(s.ee.orn.z);
        raw.proprio[7] = static_cast<float>(s.gripper_width);
        obs.sample = data::normalize_sample(std::move(raw), norm_);
        return obs;
    }

    sim::FtSample latest_ft() const override {
        return history_.empty() ? sim::FtSample{} : history_.back();
    }

    Action hold_action() const override {
        Action a;
        a.pose = world_.state().ee;
        a.width = world_.state().gripper_width;
        return a;
    }

    void execute(const Action& a) override { push_samples(world_.step(a, dt())); }

    const data::Normalizer& normalizer() const { return norm_; }

private:
    double dt() const { return world_.config().control_period; }

    void push_samples(const std::vector<sim::FtSample>& samples) {
        for (const auto& s : samples) {
            history_.push_back(s);
            if (history_.size() > 4 * t_o_) history_.pop_front();
        }
    }

    sim::SimWorld& world_;
    data::Normalizer norm_;
    std::size_t t_o_;
    std::deque<sim::FtSample> history_;
};

}  // namespace foar::runtime

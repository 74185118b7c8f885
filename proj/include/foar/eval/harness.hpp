#pragma once

#include <future>
#include <memory>

#include "foar/eval/metrics.hpp"
#include "foar/eval/oracle_policy.hpp"
#include "foar/policy/diffusion.hpp"

namespace foar::eval {

struct TrialResult {
    std::string task;
    std::string method;
    std::uint64_t seed = 0;
    double score = 0.0;
    double coverage = 0.0;
    bool grasp = false, operate = false, place = false;
    int segment_count = 0;
    double segment_mean = 0.0, segment_std = 0.0;
    std::string disturbance = "none";
    long disturb_tick = -1;  // -1 when never triggered
    long corrections = 0;
};

/// One evaluated method: a trained checkpoint (with its config sidecar) or
/// the privileged oracle when checkpoint is empty.
struct MethodSpec {
    std::string name;
    std::string checkpoint;      // empty -> scripted-expert oracle
    std::string policy_config;   // JSON sidecar; required with a checkpoint
    bool reactive = true;
};

/// Trained-policy adapter; one instance per method, shared across trials.
class PolicyRunner {
public:
    PolicyRunner(const policy::PolicyConfig& cfg, const std::string& checkpoint,
                 const sim::SimConfig& sim_cfg)
        : net_(std::make_shared<policy::FoarNetwork<float>>(cfg, 0)), norm_(sim_cfg) {
        core::load_checkpoint(net_->params(), checkpoint);
    }

    runtime::PolicyFn make_policy(std::uint64_t trial_seed) const {
        auto net = net_;
        auto norm = norm_;
        auto counter = std::make_shared<std::uint64_t>(0);
        return [net, norm, counter, trial_seed](const runtime::Observation& obs) {
            auto out = net->forward(obs.sample);
            core::Rng rng(core::Rng::splitmix(trial_seed * 0x9e3779b9ull + (*counter)++));
            auto chunk = policy::sample_actions(*net, out.conditioning, rng, norm);
            return std::make_pair(out.phi, chunk);
        };
    }

    const policy::PolicyConfig& config() const { return net_->config(); }

private:
    std::shared_ptr<policy::FoarNetwork<float>> net_;
    data::Normalizer norm_;
};

struct TrialOptions {
    sim::DisturbanceKind disturbance = sim::DisturbanceKind::None;
    std::string rollout_csv;  // written when non-empty
};

/// One seeded episode under the control loop, with the disturbance injected
/// after the first completed wipe pass (coverage >= 0.6, then phi < delta_phi).
inline TrialResult run_trial(const sim::SimConfig& sim_cfg, const MethodSpec& method,
                             const PolicyRunner* runner, sim::Task task,
                             std::uint64_t seed, const runtime::RuntimeConfig& rt_cfg,
                             const runtime::ReactiveThresholds& thr,
                             const TrialOptions& opts = {}) {
    sim::SimWorld world{sim_cfg};
    world.reset(seed, task);
    std::size_t t_o = runner ? runner->config().t_o : 200;
    std::size_t t_a = runner ? runner->config().t_a : 20;
    runtime::SimEnv env(world, t_o);
    env.settle();

    runtime::PolicyFn policy;
    std::shared_ptr<OracleChunkPolicy> oracle;
    if (runner) {
        policy = runner->make_policy(seed);
    } else {
        oracle = std::make_shared<OracleChunkPolicy>(world, t_a, rt_cfg.n_inference, seed);
        policy = [oracle](const runtime::Observation& obs) { return (*oracle)(obs); };
    }

    TrialResult result;
    result.task = sim::task_name(task);
    result.method = method.name;
    result.seed = seed;
    result.disturbance = sim::disturbance_name(opts.disturbance);

    core::Rng disturb_rng(core::Rng::splitmix(seed ^ 0xd157ULL));
    bool pass_completed = false;
    runtime::ControlLoopOptions loop_opts;
    loop_opts.no_reactive = !method.reactive;
    loop_opts.tick_hook = [&](long tick, const runtime::TickLog& tk) {
        if (opts.disturbance == sim::DisturbanceKind::None || result.disturb_tick >= 0)
            return;
        if (!pass_completed && world.task_metrics().coverage >= 0.6) pass_completed = true;
        if (pass_completed && tk.phi < thr.delta_phi) {
            world.apply_disturbance(opts.disturbance, disturb_rng);
            result.disturb_tick = tick;
        }
    };

    auto log = runtime::control_loop(env, policy, rt_cfg, thr, loop_opts);
    if (!opts.rollout_csv.empty()) log.write_csv(opts.rollout_csv);

    result.corrections = log.correction_count;
    auto events = asr_events(world.state());
    result.grasp = events.grasp;
    result.operate = events.operate;
    result.place = events.place;
    if (task == sim::Task::SurfaceWipe) {
        auto s = wiping_score(world);
        result.score = s.score;
        result.coverage = s.coverage;
    } else {
        auto s = segment_stats(world);
        result.segment_count = s.count;
        result.segment_mean = s.mean;
        result.segment_std = s.stddev;
        // segment-count score relative to the even-cut ideal of 5 segments
        result.score = std::min(1.0, (s.count - 1) / 4.0);
        result.coverage = result.score;
    }
    return result;
}

/// Paired-seed trials for one method; seeds are shared across methods by
/// construction (seed_base + i).
inline std::vector<TrialResult> run_trials(const sim::SimConfig& sim_cfg,
                                           const MethodSpec& method, sim::Task task,
                                           int n, std::uint64_t seed_base,
                                           sim::DisturbanceKind disturbance,
                                           const runtime::RuntimeConfig& rt_cfg,
                                           const runtime::ReactiveThresholds& thr,
                                           const std::string& out_dir = "",
                                           int jobs = 1) {
    std::unique_ptr<PolicyRunner> runner;
    if (!method.checkpoint.empty()) {
        auto pcfg = io::load_config<policy::PolicyConfig>(method.policy_config);
        runner = std::make_unique<PolicyRunner>(pcfg, method.checkpoint, sim_cfg);
    }
    auto one = [&](int i) {
        TrialOptions opts;
        opts.disturbance = disturbance;
        if (!out_dir.empty()) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "/trial_%02d", i);
            std::filesystem::create_directories(out_dir + buf);
            opts.rollout_csv = out_dir + buf + "/rollout.csv";
        }
        return run_trial(sim_cfg, method, runner.get(), task, seed_base + i, rt_cfg, thr,
                         opts);
    };
    std::vector<TrialResult> results(n);
    if (jobs <= 1) {
        for (int i = 0; i < n; ++i) results[i] = one(i);
    } else {
        std::vector<std::future<TrialResult>> futures;
        for (int i = 0; i < n; ++i)
            futures.push_back(std::async(std::launch::async, one, i));
        for (int i = 0; i < n; ++i) results[i] = futures[i].get();
    }
    return results;
}

struct ComparisonRow {
    std::string method;
    std::string disturbance = "none";
    int trials = 0;
    double mean_score = 0, mean_coverage = 0;
    double grasp_pct = 0, operate_pct = 0, place_pct = 0;
    double mean_segments = 0, mean_seg_len = 0, mean_seg_std = 0;
    double mean_corrections = 0;
};

inline ComparisonRow aggregate(const std::string& method, const std::string& disturbance,
                               const std::vector<TrialResult>& results) {
    ComparisonRow row;
    row.method = method;
    row.disturbance = disturbance;
    row.trials = static_cast<int>(results.size());
    if (results.empty()) return row;
    for (const auto& r : results) {
        row.mean_score += r.score;
        row.mean_coverage += r.coverage;
        row.grasp_pct += r.grasp ? 100.0 : 0.0;
        row.operate_pct += r.operate ? 100.0 : 0.0;
        row.place_pct += r.place ? 100.0 : 0.0;
        row.mean_segments += r.segment_count;
        row.mean_seg_len += r.segment_mean;
        row.mean_seg_std += r.segment_std;
        row.mean_corrections += static_cast<double>(r.corrections);
    }
    double n = static_cast<double>(results.size());
    row.mean_score /= n;
    row.mean_coverage /= n;
    row.grasp_pct /= n;
    row.operate_pct /= n;
    row.place_pct /= n;
    row.mean_segments /= n;
    row.mean_seg_len /= n;
    row.mean_seg_std /= n;
    row.mean_corrections /= n;
    return row;
}

inline void write_rows_csv(const std::vector<ComparisonRow>& rows, const std::string& path) {
    std::ofstream os(path);
    os << "method,disturbance,trials,mean_score,mean_coverage,grasp_pct,operate_pct,"
          "place_pct,mean_segments,mean_seg_len,mean_seg_std,mean_corrections\n";
    char buf[320];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf,
                      "%s,%s,%d,%.6f,%.6f,%.1f,%.1f,%.1f,%.3f,%.6f,%.6f,%.2f\n",
                      r.method.c_str(), r.disturbance.c_str(), r.trials, r.mean_score,
                      r.mean_coverage, r.grasp_pct, r.operate_pct, r.place_pct,
                      r.mean_segments, r.mean_seg_len, r.mean_seg_std,
                      r.mean_corrections);
        os << buf;
    }
}

inline std::string render_text_table(const std::vector<ComparisonRow>& rows) {
    std::string out;
    char buf[320];
    std::snprintf(buf, sizeof buf, "%-24s %-14s %6s %8s %10s %7s %9s %7s\n", "method",
                  "disturbance", "n", "score", "coverage", "grasp", "operate", "place");
    out += buf;
    out += std::string(92, '-') + "\n";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-24s %-14s %6d %8.3f %10.3f %6.0f%% %8.0f%% %6.0f%%\n",
                      r.method.c_str(), r.disturbance.c_str(), r.trials, r.mean_score,
                      r.mean_coverage, r.grasp_pct, r.operate_pct, r.place_pct);
        out += buf;
    }
    return out;
}

struct AblationSpec {
    std::vector<MethodSpec> methods;
    std::vector<sim::DisturbanceKind> disturbances = {sim::DisturbanceKind::None};
    int trials = 20;
    std::uint64_t seed_base = 1000;
    int jobs = 1;
};

/// Comparison tables over methods x disturbances with shared seeds; per-trial
/// rollout logs land under out_dir/<method>[_<disturbance>]/trial_NN/.
inline std::vector<ComparisonRow> ablation_matrix(const sim::SimConfig& sim_cfg,
                                                  sim::Task task, const AblationSpec& spec,
                                                  const runtime::RuntimeConfig& rt_cfg,
                                                  const runtime::ReactiveThresholds& thr,
                                                  const std::string& out_dir = "") {
    std::vector<ComparisonRow> rows;
    for (const auto& method : spec.methods) {
        for (auto kind : spec.disturbances) {
            std::string trial_dir;
            if (!out_dir.empty()) {
                trial_dir = out_dir + "/" + method.name;
                if (kind != sim::DisturbanceKind::None)
                    trial_dir += "_" + sim::disturbance_name(kind);
                std::filesystem::create_directories(trial_dir);
            }
            auto results = run_trials(sim_cfg, method, task, spec.trials, spec.seed_base,
                                      kind, rt_cfg, thr, trial_dir, spec.jobs);
            rows.push_back(
                aggregate(method.name, sim::disturbance_name(kind), results));
        }
    }
    if (!out_dir.empty()) {
        write_rows_csv(rows, out_dir + "/comparison.csv");
        std::ofstream(out_dir + "/comparison.txt") << render_text_table(rows);
    }
    return rows;
}

}  // namespace foar::eval

#pragma once

#include <CLI11.hpp>

#include "foar/eval/harness.hpp"
#include "foar/policy/train.hpp"

namespace foar::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

namespace detail {

inline sim::SimConfig load_sim_config(const std::string& path) {
    if (path.empty()) return sim::SimConfig{};
    auto cfg = io::load_config<sim::SimConfig>(path);
    cfg.validate();
    return cfg;
}

template <class T>
T load_or_default(const std::string& path) {
    if (path.empty()) return T{};
    return io::load_config<T>(path);
}

}  // namespace detail

inline int cmd_demo_gen(const std::string& task_name, int episodes, std::uint64_t seed,
                        const std::string& out, const std::string& physics_path) {
    sim::Task task = sim::task_from_name(task_name);
    sim::SimConfig cfg = detail::load_sim_config(physics_path);
    std::filesystem::create_directories(out);

    int written = 0, skipped = 0;
    std::uint64_t episode_seed = seed;
    while (written < episodes) {
        auto ep = data::record_episode(cfg, episode_seed, task);
        if (ep.has_value()) {
            data::write_episode(*ep, data::episode_dir(out, written));
            ++written;
        } else {
            ++skipped;
            std::printf("episode seed %llu failed, skipped\n",
                        static_cast<unsigned long long>(episode_seed));
            if (skipped > episodes * 3 + 10) {
                std::fprintf(stderr, "too many expert failures\n");
                return kExitRuntime;
            }
        }
        ++episode_seed;
    }
    data::DatasetMeta meta;
    meta.task = sim::task_name(task);
    meta.config_hash = io::config_hash(nlohmann::json(cfg));
    meta.episodes = static_cast<std::size_t>(written);
    meta.seed = seed;
    meta.sim = cfg;
    data::write_dataset_meta(meta, out);
    std::printf("wrote %d episodes to %s (%d skipped)\n", written, out.c_str(), skipped);
    return kExitOk;
}

inline int cmd_train(const std::string& data_dir, const std::string& out,
                     const std::string& policy_cfg_path, const std::string& train_cfg_path,
                     const std::string& label_cfg_path, const std::string& fusion_mode,
                     std::int64_t seed_override) {
    auto pcfg = detail::load_or_default<policy::PolicyConfig>(policy_cfg_path);
    auto tcfg = detail::load_or_default<core::TrainConfig>(train_cfg_path);
    auto lcfg = detail::load_or_default<data::LabelConfig>(label_cfg_path);
    if (!fusion_mode.empty()) pcfg.fusion_mode = fusion_mode;
    if (seed_override >= 0) tcfg.seed = static_cast<std::uint64_t>(seed_override);
    pcfg.validate();
    tcfg.validate();

    data::Dataset dataset = data::Dataset::open(data_dir, lcfg, pcfg.t_o, pcfg.t_a);
    std::printf("dataset: %zu episodes, %zu samples, task %s\n", dataset.episodes(),
                dataset.size(), dataset.meta().task.c_str());
    policy::TrainResult result =
        tcfg.precision == "f64" ? policy::train<double>(dataset, tcfg, pcfg, out, true)
                                : policy::train<float>(dataset, tcfg, pcfg, out, true);
    if (!result.ok) {
        std::fprintf(stderr, "training failed: %s\n", result.error.c_str());
        return kExitRuntime;
    }
    std::printf("trained %zu steps; checkpoints in %s\n", result.steps_done, out.c_str());
    return kExitOk;
}

inline int cmd_rollout(const std::string& checkpoint, const std::string& policy_cfg_path,
                       const std::string& task_name, std::uint64_t seed,
                       const std::string& physics_path, const std::string& thresholds_path,
                       const std::string& runtime_path, bool no_reactive,
                       const std::string& disturb, const std::string& out,
                       const std::string& method_name) {
    sim::Task task = sim::task_from_name(task_name);
    sim::SimConfig sim_cfg = detail::load_sim_config(physics_path);
    auto thr = detail::load_or_default<runtime::ReactiveThresholds>(thresholds_path);
    auto rt = detail::load_or_default<runtime::RuntimeConfig>(runtime_path);
    thr.validate();
    rt.validate();

    eval::MethodSpec method;
    method.name = method_name;
    method.reactive = !no_reactive;
    std::unique_ptr<eval::PolicyRunner> runner;
    if (checkpoint != "oracle") {
        method.checkpoint = checkpoint;
        std::string cfg_path = policy_cfg_path;
        if (cfg_path.empty())
            cfg_path =
                std::filesystem::path(checkpoint).parent_path() / "policy_config.json";
        method.policy_config = cfg_path;
        auto pcfg = io::load_config<policy::PolicyConfig>(cfg_path);
        runner = std::make_unique<eval::PolicyRunner>(pcfg, checkpoint, sim_cfg);
    }

    eval::TrialOptions opts;
    opts.disturbance = sim::disturbance_from_name(disturb);
    if (!out.empty()) {
        std::filesystem::create_directories(out);
        opts.rollout_csv = out + "/rollout.csv";
    }
    auto result = eval::run_trial(sim_cfg, method, runner.get(), task, seed, rt, thr, opts);
    std::printf("task=%s method=%s seed=%llu score=%.3f coverage=%.3f grasp=%d operate=%d "
                "place=%d corrections=%ld disturb_tick=%ld\n",
                result.task.c_str(), result.method.c_str(),
                static_cast<unsigned long long>(result.seed), result.score,
                result.coverage, result.grasp ? 1 : 0, result.operate ? 1 : 0,
                result.place ? 1 : 0, result.corrections, result.disturb_tick);
    return kExitOk;
}

inline int cmd_eval(const std::string& config_path, int jobs_override) {
    nlohmann::json j = io::load_json(config_path);
    sim::Task task = sim::task_from_name(j.value("task", "wipe"));
    sim::SimConfig sim_cfg =
        j.contains("physics") ? j.at("physics").get<sim::SimConfig>() : sim::SimConfig{};
    auto rt = j.contains("runtime") ? j.at("runtime").get<runtime::RuntimeConfig>()
                                    : runtime::RuntimeConfig{};
    auto thr = j.contains("thresholds")
                   ? j.at("thresholds").get<runtime::ReactiveThresholds>()
                   : runtime::ReactiveThresholds{};
    eval::AblationSpec spec;
    spec.trials = j.value("trials", 20);
    spec.seed_base = j.value("seed_base", std::uint64_t(1000));
    spec.jobs = jobs_override > 0 ? jobs_override : j.value("jobs", 1);
    for (const auto& m : j.at("methods")) {
        eval::MethodSpec method;
        method.name = m.at("name").get<std::string>();
        method.checkpoint = m.value("checkpoint", "");
        method.policy_config = m.value("policy_config", "");
        method.reactive = m.value("reactive", true);
        if (!method.checkpoint.empty() && method.policy_config.empty())
            method.policy_config = std::filesystem::path(method.checkpoint).parent_path() /
                                   "policy_config.json";
        spec.methods.push_back(method);
    }
    spec.disturbances.clear();
    if (j.contains("disturbances"))
        for (const auto& d : j.at("disturbances"))
            spec.disturbances.push_back(sim::disturbance_from_name(d.get<std::string>()));
    if (spec.disturbances.empty())
        spec.disturbances.push_back(sim::DisturbanceKind::None);

    std::string out = j.value("out", "eval_out");
    std::filesystem::create_directories(out);
    // record the pairing metadata alongside the tables
    nlohmann::json meta;
    meta["seed_base"] = spec.seed_base;
    meta["trials"] = spec.trials;
    meta["paired_seeds"] = true;
    io::save_json(meta, out + "/seeds.json");

    auto rows = eval::ablation_matrix(sim_cfg, task, spec, rt, thr, out);
    std::printf("%s", eval::render_text_table(rows).c_str());
    std::printf("report written to %s\n", out.c_str());
    return kExitOk;
}

inline int cmd_label_check(const std::string& data_dir, const std::string& label_cfg_path,
                           const std::string& out) {
    auto lcfg = detail::load_or_default<data::LabelConfig>(label_cfg_path);
    data::DatasetMeta meta = data::read_dataset_meta(data_dir);
    if (meta.episodes == 0) {
        std::fprintf(stderr, "dataset %s has no episodes\n", data_dir.c_str());
        return kExitRuntime;
    }
    std::filesystem::create_directories(out);
    char buf[256];
    for (std::size_t e = 0; e < meta.episodes; ++e) {
        data::Episode ep = data::read_episode(data::episode_dir(data_dir, e));
        std::vector<double> times;
        for (const auto& tk : ep.ticks) times.push_back(tk.t);
        auto labels = data::extract_contact_labels(ep.ft, lcfg, times);
        std::snprintf(buf, sizeof buf, "%s/labels_ep%04zu.csv", out.c_str(), e);
        std::ofstream os(buf);
        os << "t,f_norm,tau_norm,label\n";
        // per-tick norms use the sample closest to the tick time
        std::size_t si = 0;
        long ones = 0;
        for (std::size_t k = 0; k < ep.ticks.size(); ++k) {
            while (si + 1 < ep.ft.size() && ep.ft[si + 1].t <= times[k]) ++si;
            std::snprintf(buf, sizeof buf, "%.4f,%.6f,%.6f,%d\n", times[k],
                          ep.ft[si].force_norm(), ep.ft[si].torque_norm(),
                          labels[k] ? 1 : 0);
            os << buf;
            ones += labels[k];
        }
        std::printf("episode %zu: %zu ticks, %ld contact, %ld non-contact\n", e,
                    ep.ticks.size(), ones, static_cast<long>(ep.ticks.size()) - ones);
    }
    return kExitOk;
}

/// Full CLI; argv-style entry shared by the binary and the tests.
inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"Force-aware reactive manipulation: simulator, policy, and evaluation"};
    app.require_subcommand(1);

    // demo-gen
    auto* gen = app.add_subcommand("demo-gen", "Record scripted-expert demonstrations");
    std::string gen_task = "wipe", gen_out, gen_physics;
    int gen_episodes = 0;
    std::uint64_t gen_seed = 0;
    gen->add_option("--task", gen_task, "Task: wipe or cut");
    gen->add_option("--episodes", gen_episodes, "Number of episodes")
        ->required()
        ->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "Base seed");
    gen->add_option("--out", gen_out, "Output dataset directory")->required();
    gen->add_option("--physics", gen_physics, "Physics/task config JSON");

    // train
    auto* tr = app.add_subcommand("train", "Train a policy on a recorded dataset");
    std::string tr_data, tr_out, tr_pcfg, tr_tcfg, tr_lcfg, tr_mode;
    std::int64_t tr_seed = -1;
    tr->add_option("--data", tr_data, "Dataset directory")->required();
    tr->add_option("--out", tr_out, "Output directory")->required();
    tr->add_option("--policy-config", tr_pcfg, "Policy config JSON");
    tr->add_option("--train-config", tr_tcfg, "Train config JSON");
    tr->add_option("--label-config", tr_lcfg, "Label config JSON");
    tr->add_option("--fusion-mode", tr_mode,
                   "gated | force_token | force_concat | vision_only | gated_3dcls | "
                   "gated_mlp_ft");
    tr->add_option("--seed", tr_seed, "Training seed override");

    // rollout
    auto* ro = app.add_subcommand("rollout", "Run one policy episode in the simulator");
    std::string ro_ckpt, ro_pcfg, ro_task = "wipe", ro_physics, ro_thr, ro_rt, ro_disturb,
                ro_out, ro_name = "policy";
    std::uint64_t ro_seed = 0;
    bool ro_noreactive = false;
    ro->add_option("--checkpoint", ro_ckpt, "Checkpoint path, or 'oracle'")->required();
    ro->add_option("--policy-config", ro_pcfg, "Policy config JSON (default: sidecar)");
    ro->add_option("--task", ro_task, "Task: wipe or cut");
    ro->add_option("--seed", ro_seed, "Episode seed");
    ro->add_option("--physics", ro_physics, "Physics config JSON");
    ro->add_option("--thresholds", ro_thr, "Reactive thresholds JSON");
    ro->add_option("--runtime", ro_rt, "Runtime config JSON");
    ro->add_flag("--no-reactive", ro_noreactive, "Disable the action correction");
    ro->add_option("--disturb", ro_disturb, "none | rewrite | move | rewrite+move");
    ro->add_option("--out", ro_out, "Directory for the rollout log");
    ro->add_option("--method-name", ro_name, "Label used in the printed line");

    // eval
    auto* ev = app.add_subcommand("eval", "Run a multi-method evaluation experiment");
    std::string ev_cfg;
    int ev_jobs = 0;
    ev->add_option("--config", ev_cfg, "Experiment config JSON")->required();
    ev->add_option("--jobs", ev_jobs, "Parallel trials");

    // label-check
    auto* lc = app.add_subcommand("label-check", "Inspect contact labels of a dataset");
    std::string lc_data, lc_lcfg, lc_out = "label_check";
    lc->add_option("--data", lc_data, "Dataset directory")->required();
    lc->add_option("--label-config", lc_lcfg, "Label config JSON");
    lc->add_option("--out", lc_out, "Output directory for per-episode CSVs");

    std::vector<const char*> argv;
    std::string prog = "foar";
    argv.push_back(prog.c_str());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen->parsed())
            return cmd_demo_gen(gen_task, gen_episodes, gen_seed, gen_out, gen_physics);
        if (tr->parsed())
            return cmd_train(tr_data, tr_out, tr_pcfg, tr_tcfg, tr_lcfg, tr_mode, tr_seed);
        if (ro->parsed())
            return cmd_rollout(ro_ckpt, ro_pcfg, ro_task, ro_seed, ro_physics, ro_thr,
                               ro_rt, ro_noreactive, ro_disturb, ro_out, ro_name);
        if (ev->parsed()) return cmd_eval(ev_cfg, ev_jobs);
        if (lc->parsed()) return cmd_label_check(lc_data, lc_lcfg, lc_out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace foar::cli

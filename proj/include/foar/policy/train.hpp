#pragma once

#include <deque>

#include "foar/core/optim.hpp"
#include "foar/policy/diffusion.hpp"

namespace foar::policy {

struct TrainResult {
    bool ok = false;
    std::string error;
    std::size_t steps_done = 0;
    std::string best_checkpoint;
    std::string final_checkpoint;
    std::string log_path;
};

/// Seeded training loop: uniform batch sampling, augmentation, Adam with
/// warmup+cosine schedule, CSV loss log, best/final checkpoints. Aborts on a
/// non-finite loss, keeping the last good checkpoint.
template <class S>
TrainResult train(const data::Dataset& dataset, const core::TrainConfig& tcfg,
                  const PolicyConfig& pcfg, const std::string& out_dir,
                  bool log_to_stdout = false) {
    namespace fs = std::filesystem;
    tcfg.validate();
    pcfg.validate();
    TrainResult result;
    if (dataset.size() == 0) {
        result.error = "dataset is empty";
        return result;
    }
    fs::create_directories(out_dir);
    result.best_checkpoint = out_dir + "/checkpoint_best.foar";
    result.final_checkpoint = out_dir + "/checkpoint_final.foar";
    result.log_path = out_dir + "/train_log.csv";
    io::save_json(nlohmann::json(pcfg), out_dir + "/policy_config.json");

    FoarNetwork<S> net(pcfg, tcfg.seed);
    core::AdamState<S> adam;
    core::Rng master(core::Rng::splitmix(tcfg.seed ^ 0x7271ULL));
    core::Rng batch_rng = master.derive(1);
    core::Rng aug_rng = master.derive(2);

    std::ofstream log(result.log_path);
    log << "step,lr,loss_action,loss_predictor,loss_total\n";

    std::deque<double> window;
    double best_avg = std::numeric_limits<double>::infinity();
    char row[160];
    for (std::size_t step = 1; step <= tcfg.total_steps; ++step) {
        std::vector<std::size_t> indices(tcfg.batch_size);
        for (auto& idx : indices) idx = batch_rng.uniform_int(dataset.size());
        auto batch = dataset.load_batch(indices);
        if (tcfg.augment)
            for (auto& sample : batch) data::augment(sample, aug_rng);

        double lr = core::lr_at_step(tcfg, step);
        double la = 0, lp = 0, lt = 0;
        try {
            net.params().zero_grad();
            auto loss = diffusion_loss(net, batch, tcfg.seed * 1000003 + step, tcfg.alpha);
            la = static_cast<double>(loss.action.item());
            lp = static_cast<double>(loss.predictor.item());
            lt = static_cast<double>(loss.total.item());
            loss.total.backward();
            core::optimizer_step(adam, net.params(), lr);
        } catch (const core::TrainingError& e) {
            result.error = std::string("diverged at step ") + std::to_string(step) + ": " +
                           e.what();
            result.steps_done = step - 1;
            // keep the last good parameters on disk
            core::save_checkpoint(net.params(), result.final_checkpoint);
            return result;
        }
        std::snprintf(row, sizeof row, "%zu,%.9e,%.9e,%.9e,%.9e\n", step, lr, la, lp, lt);
        log << row;
        if (log_to_stdout && (step % 50 == 0 || step == 1))
            std::printf("step %zu lr %.3e action %.4f predictor %.4f total %.4f\n", step,
                        lr, la, lp, lt);

        window.push_back(lt);
        if (window.size() > 25) window.pop_front();
        if (window.size() == 25) {
            double avg = 0;
            for (double v : window) avg += v;
            avg /= static_cast<double>(window.size());
            if (avg < best_avg) {
                best_avg = avg;
                core::save_checkpoint(net.params(), result.best_checkpoint);
            }
        }
        result.steps_done = step;
    }
    core::save_checkpoint(net.params(), result.final_checkpoint);
    if (!fs::exists(result.best_checkpoint))
        core::save_checkpoint(net.params(), result.best_checkpoint);
    result.ok = true;
    return result;
}

}  // namespace foar::policy

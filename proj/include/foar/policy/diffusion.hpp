#pragma once

#include "foar/policy/network.hpp"

namespace foar::policy {

/// Linear-beta DDPM schedule; index 0 is the clean signal (alpha_bar = 1).
struct DiffusionSchedule {
    std::vector<double> alpha_bar;  // size steps + 1

    DiffusionSchedule(std::size_t steps, double beta_lo, double beta_hi) {
        alpha_bar.resize(steps + 1);
        alpha_bar[0] = 1.0;
        double prod = 1.0;
        for (std::size_t t = 1; t <= steps; ++t) {
            double beta =
                steps == 1 ? beta_lo
                           : beta_lo + (beta_hi - beta_lo) * static_cast<double>(t - 1) /
                                           static_cast<double>(steps - 1);
            prod *= 1.0 - beta;
            alpha_bar[t] = prod;
        }
    }
};

template <class S>
struct LossOutput {
    core::Tensor<S> total;
    core::Tensor<S> action;
    core::Tensor<S> predictor;  // zero constant for modes without a predictor
};

/// Clean-signal prediction on the flattened chunk. The head is parameterized
/// in x0 form: the x_t carry-through lives in the noise formula itself, so
/// the network output has to come from the conditioning. The conditioning
/// enters through feature-wise scale/shift modulation of every hidden layer.
template <class S>
core::Tensor<S> head_predict_x0(const FoarNetwork<S>& net,
                                const core::Tensor<S>& noisy_flat,
                                const core::Tensor<S>& conditioning, std::size_t t) {
    const auto& cfg = net.config();
    const auto& ps = net.params();
    const auto& pe = net.time_pe();
    std::size_t hid = cfg.head_hidden;
    std::vector<S> emb(cfg.time_embed_dim);
    for (std::size_t c = 0; c < cfg.time_embed_dim; ++c) emb[c] = pe.at(t, c);
    auto t_emb = core::Tensor<S>::from_vector({1, cfg.time_embed_dim}, std::move(emb));
    auto cond_row = core::reshape(conditioning, {1, conditioning.numel()});

    auto film = [&](const std::string& prefix, const core::Tensor<S>& h) {
        auto both = core::linear(ps, prefix, cond_row);  // (1, 2*hid)
        auto scale = core::slice_cols(both, 0, hid);
        auto shift = core::slice_cols(both, hid, 2 * hid);
        return core::add(core::add(h, core::mul(h, scale)), shift);
    };

    auto input = core::concat_cols<S>(
        {core::reshape(noisy_flat, {1, cfg.chunk_dim()}), t_emb});
    auto h = core::gelu(core::linear(ps, "head/l0", input));
    h = film("head/film0", h);
    h = core::gelu(core::linear(ps, "head/l1", h));
    h = film("head/film1", h);
    auto out = core::linear(ps, "head/out", h);
    return core::reshape(out, {cfg.chunk_dim()});
}

/// eps_hat = (x_t - sqrt(alpha_bar) * x0_hat) / sqrt(1 - alpha_bar).
template <class S>
core::Tensor<S> noise_from_x0(const core::Tensor<S>& noisy_flat,
                              const core::Tensor<S>& x0_hat, double alpha_bar) {
    double sa = std::sqrt(alpha_bar);
    double sn = std::sqrt(1.0 - alpha_bar);
    return core::scale(core::sub(noisy_flat, core::scale(x0_hat, static_cast<S>(sa))),
                       static_cast<S>(1.0 / sn));
}

/// Combined training loss on a batch: denoising L2 plus alpha-weighted BCE
/// for the contact predictor. Deterministic given noise_seed.
template <class S>
LossOutput<S> diffusion_loss(const FoarNetwork<S>& net,
                             const std::vector<data::TrainingSample>& batch,
                             std::uint64_t noise_seed, double alpha) {
    if (batch.empty()) throw PolicyError("diffusion_loss: empty batch");
    const auto& cfg = net.config();
    DiffusionSchedule sched(cfg.ddpm_train_steps, cfg.beta_lo, cfg.beta_hi);
    core::Rng rng(core::Rng::splitmix(noise_seed ^ 0xd1ffULL));

    core::Tensor<S> action_sum;
    std::vector<core::Tensor<S>> logits;
    std::vector<double> labels;
    bool first = true;
    for (const auto& sample : batch) {
        if (sample.action_chunk.size() != cfg.chunk_dim())
            throw PolicyError("diffusion_loss: chunk size mismatch");
        auto out = net.forward(sample);
        if (out.logit.has_value()) {
            logits.push_back(*out.logit);
            labels.push_back(sample.label);
        }
        // noise the normalized chunk at a uniformly sampled timestep
        std::size_t t = 1 + rng.uniform_int(cfg.ddpm_train_steps);
        double sa = std::sqrt(sched.alpha_bar[t]);
        double sn = std::sqrt(1.0 - sched.alpha_bar[t]);
        std::vector<S> noisy(cfg.chunk_dim()), eps(cfg.chunk_dim());
        for (std::size_t i = 0; i < cfg.chunk_dim(); ++i) {
            double e = rng.normal();
            eps[i] = static_cast<S>(e);
            noisy[i] = static_cast<S>(sa * sample.action_chunk[i] + sn * e);
        }
        auto noisy_t = core::Tensor<S>::from_vector({cfg.chunk_dim()}, std::move(noisy));
        // input-side dropout of x_t: the head must then reconstruct the
        // chunk from the conditioning alone, which keeps that path trained
        bool mask_xt = rng.uniform() < cfg.xt_dropout;
        auto head_in = mask_xt ? core::Tensor<S>::zeros({cfg.chunk_dim()}) : noisy_t;
        auto x0_hat = head_predict_x0(net, head_in, out.conditioning, t);
        auto pred = noise_from_x0(noisy_t, x0_hat, sched.alpha_bar[t]);
        auto sample_loss = core::mse_against(pred, eps);
        action_sum = first ? sample_loss : core::add(action_sum, sample_loss);
        first = false;
    }
    LossOutput<S> out{};
    out.action = core::scale(action_sum, static_cast<S>(1.0 / batch.size()));
    if (!logits.empty()) {
        core::Tensor<S> stack = logits.size() == 1
                                    ? logits[0]
                                    : core::reshape(core::concat_cols<S>([&] {
                                          std::vector<core::Tensor<S>> rows;
                                          for (auto& l : logits)
                                              rows.push_back(core::reshape(l, {1, 1}));
                                          return rows;
                                      }()),
                                                    {logits.size()});
        out.predictor = core::bce_logits_mean(stack, labels);
    } else {
        out.predictor = core::Tensor<S>::zeros({1});
    }
    out.total = core::add(out.action, core::scale(out.predictor, static_cast<S>(alpha)));
    if (!out.total.all_finite()) throw core::TrainingError("diffusion_loss: non-finite loss");
    return out;
}

/// L_total = L_action + alpha * L_predictor (plain arithmetic, used by the
/// loss above and asserted on every logged step).
inline double combine_losses(double l_action, double l_predictor, double alpha) {
    return l_action + alpha * l_predictor;
}

/// Deterministic DDIM sampler (eta = 0); `steps` evenly spaced timesteps.
template <class S>
std::vector<double> sample_chunk_normalized(const FoarNetwork<S>& net,
                                            const core::Tensor<S>& conditioning,
                                            core::Rng& rng) {
    const auto& cfg = net.config();
    DiffusionSchedule sched(cfg.ddpm_train_steps, cfg.beta_lo, cfg.beta_hi);
    std::size_t n = cfg.ddpm_train_steps, s = cfg.ddim_infer_steps;
    std::vector<std::size_t> taus(s);
    for (std::size_t i = 0; i < s; ++i)
        taus[i] = ((i + 1) * n) / s;  // ascending, ends at n

    std::vector<double> x(cfg.chunk_dim());
    for (auto& v : x) v = rng.normal();

    for (std::size_t i = s; i-- > 0;) {
        std::size_t t = taus[i];
        std::size_t t_prev = i == 0 ? 0 : taus[i - 1];
        std::vector<S> xs(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) xs[k] = static_cast<S>(x[k]);
        auto xt = core::Tensor<S>::from_vector({cfg.chunk_dim()}, std::move(xs));
        auto x0_hat = head_predict_x0(net, xt, conditioning, t);
        double sa = std::sqrt(sched.alpha_bar[t]);
        double sn = std::sqrt(1.0 - sched.alpha_bar[t]);
        double sa_prev = std::sqrt(sched.alpha_bar[t_prev]);
        double sn_prev = std::sqrt(1.0 - sched.alpha_bar[t_prev]);
        for (std::size_t k = 0; k < x.size(); ++k) {
            double x0 = std::clamp(static_cast<double>(x0_hat.value()[k]), -1.5, 1.5);
            double e = (x[k] - sa * x0) / sn;
            x[k] = sa_prev * x0 + sn_prev * e;
        }
    }
    return x;
}

using foar::ActionChunk;

/// Denormalizes a sampled chunk into executable end-effector targets.
template <class S>
ActionChunk sample_actions(const FoarNetwork<S>& net, const core::Tensor<S>& conditioning,
                           core::Rng& rng, const data::Normalizer& norm) {
    auto flat = sample_chunk_normalized(net, conditioning, rng);
    const auto& cfg = net.config();
    ActionChunk chunk(cfg.t_a);
    for (std::size_t k = 0; k < cfg.t_a; ++k) {
        const double* row = flat.data() + k * 8;
        Action& a = chunk[k];
        a.pose.pos = norm.denormalize_pos({std::clamp(row[0], -1.0, 1.0),
                                           std::clamp(row[1], -1.0, 1.0),
                                           std::clamp(row[2], -1.0, 1.0)});
        Quat q{row[3], row[4], row[5], row[6]};
        a.pose.orn = q.norm() < 1e-6 ? Quat::identity() : q.normalized();
        a.width = norm.dwidth(std::clamp(row[7], -1.0, 1.0));
    }
    return chunk;
}

}  // namespace foar::policy

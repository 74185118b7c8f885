#pragma once

#include <array>
#include <optional>

#include "foar/core/checkpoint.hpp"
#include "foar/core/grad_check.hpp"
#include "foar/core/nn.hpp"
#include "foar/data/dataset.hpp"
#include "foar/policy/config.hpp"

namespace foar::policy {

template <class S>
struct PolicyOutput {
    double phi = 0.0;                       // contact probability (0 when no predictor)
    std::optional<core::Tensor<S>> logit;   // predictor logit, present in gated modes
    core::Tensor<S> conditioning;           // width 2*d_model
};

/// The network: scene encoder (per-point MLP + voxel pooling + transformer
/// readout), temporal force encoder, future contact predictor, and gated
/// fusion with a learnable neutral embedding.
template <class S>
class FoarNetwork {
public:
    FoarNetwork(PolicyConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        mode_ = cfg_.mode();
        core::Rng rng(core::Rng::splitmix(seed ^ 0xf0a9ULL));
        std::size_t d = cfg_.d_model;

        core::mlp_init(ps_, "scene/pt", 6, {d, d}, rng);
        core::init_linear(ps_, "scene/pos", 3, d, rng);
        core::attention_init(ps_, "scene/enc", attn_dims(), rng);
        ps_.add("scene/readout", core::Tensor<S>::randu({d}, rng, -0.1, 0.1));

        if (mode_uses_force(mode_)) {
            if (mode_ == FusionMode::GatedMlpFt) {
                core::mlp_init(ps_, "force/mlp", cfg_.t_o * 6, {128, d}, rng);
            } else {
                core::mlp_init(ps_, "force/tok", 6, {64, 128, d}, rng);
                if (mode_ != FusionMode::ForceToken) {
                    core::attention_init(ps_, "force/enc", attn_dims(), rng);
                    ps_.add("force/readout", core::Tensor<S>::randu({d}, rng, -0.1, 0.1));
                }
            }
        }
        if (mode_has_predictor(mode_)) {
            if (mode_ != FusionMode::Gated3dCls) {
                ps_.add("pred/conv1/w", core::Tensor<S>::randu({8, 3, 3, 3}, rng, -0.2, 0.2));
                ps_.add("pred/conv1/b", core::Tensor<S>::zeros({8}));
                ps_.add("pred/conv2/w", core::Tensor<S>::randu({16, 8, 3, 3}, rng, -0.1, 0.1));
                ps_.add("pred/conv2/b", core::Tensor<S>::zeros({16}));
                core::init_linear(ps_, "pred/img", conv_flat_dim(), d, rng);
            }
            core::mlp_init(ps_, "pred/force", cfg_.t_o * 6, {128, d}, rng);
            core::init_linear(ps_, "pred/out", 2 * d, 1, rng);
            ps_.add("fuse/h_star", core::Tensor<S>::randu({d}, rng, -0.1, 0.1));
        }
        // Diffusion head: MLP over [noisy chunk; t-embed] with per-layer
        // feature-wise modulation from the conditioning vector.
        std::size_t cond_dim = 2 * d;
        std::size_t head_in = cfg_.chunk_dim() + cfg_.time_embed_dim;
        core::init_linear(ps_, "head/l0", head_in, cfg_.head_hidden, rng);
        core::init_linear(ps_, "head/film0", cond_dim, 2 * cfg_.head_hidden, rng);
        core::init_linear(ps_, "head/l1", cfg_.head_hidden, cfg_.head_hidden, rng);
        core::init_linear(ps_, "head/film1", cond_dim, 2 * cfg_.head_hidden, rng);
        core::init_linear(ps_, "head/out", cfg_.head_hidden, cfg_.chunk_dim(), rng);

        force_pe_ = core::sinusoidal_pe<S>(cfg_.t_o, d);
        time_pe_ = core::sinusoidal_pe<S>(cfg_.ddpm_train_steps + 1, cfg_.time_embed_dim);
    }

    const core::Tensor<S>& time_pe() const { return time_pe_; }

    const PolicyConfig& config() const { return cfg_; }
    FusionMode mode() const { return mode_; }
    core::ParamStore<S>& params() { return ps_; }
    const core::ParamStore<S>& params() const { return ps_; }

    core::AttentionDims attn_dims() const {
        return {cfg_.d_model, cfg_.n_heads, cfg_.d_ff, cfg_.n_blocks};
    }

    /// Scene feature from a normalized cloud; bit-exactly invariant to point
    /// order (pooling groups and accumulation order are canonicalized).
    core::Tensor<S> encode_scene(const std::vector<float>& cloud) const {
        if (cloud.empty()) throw PolicyError("encode_scene: empty cloud");
        std::size_t n = cloud.size() / 6;
        std::vector<S> vals(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) vals[i] = static_cast<S>(cloud[i]);
        auto points = core::Tensor<S>::from_vector({n, 6}, std::move(vals));
        auto feats = core::mlp_apply(ps_, "scene/pt", points,
                                     {cfg_.d_model, cfg_.d_model});

        auto [groups, centers] = voxel_groups(cloud);
        auto pooled = core::group_mean_rows(feats, groups);
        auto centers_t = core::Tensor<S>::from_vector({groups.size(), 3}, centers);
        auto pos_enc = core::linear(ps_, "scene/pos", centers_t);
        return core::attention_encode(ps_, "scene/enc", pooled, pos_enc,
                                      ps_.at("scene/readout"), attn_dims());
    }

    /// Temporal force feature from a (T_o, 6) window.
    core::Tensor<S> encode_force(const std::vector<float>& window) const {
        if (window.size() != cfg_.t_o * 6)
            throw PolicyError("encode_force: window must be (T_o, 6)");
        if (mode_ == FusionMode::GatedMlpFt) {
            std::vector<S> flat(window.begin(), window.end());
            auto x = core::Tensor<S>::from_vector({1, cfg_.t_o * 6}, std::move(flat));
            auto out = core::mlp_apply(ps_, "force/mlp", x, {128, cfg_.d_model});
            return core::reshape(out, {cfg_.d_model});
        }
        auto [tokens, pe] = force_tokens(window, cfg_.force_stride);
        return core::attention_encode(ps_, "force/enc", tokens, pe,
                                      ps_.at("force/readout"), attn_dims());
    }

    /// Future contact probability; in gated_3dcls mode the caller passes the
    /// scene feature and the image is ignored.
    std::pair<core::Tensor<S>, double> predict_contact(
        const sim::ImageGrid& image, const std::vector<float>& window,
        const core::Tensor<S>* scene_feature = nullptr) const {
        if (!mode_has_predictor(mode_)) throw PolicyError("mode has no predictor");
        core::Tensor<S> img_feat;
        if (mode_ == FusionMode::Gated3dCls) {
            if (!scene_feature) throw PolicyError("gated_3dcls needs the scene feature");
            img_feat = *scene_feature;
        } else {
            std::vector<S> vals(image.data.size());
            // HWC file order to CHW tensor order
            for (int c = 0; c < image.c; ++c)
                for (int y = 0; y < image.h; ++y)
                    for (int x = 0; x < image.w; ++x)
                        vals[(c * image.h + y) * image.w + x] =
                            static_cast<S>(image.at(y, x, c));
            auto img = core::Tensor<S>::from_vector(
                {static_cast<std::size_t>(image.c), static_cast<std::size_t>(image.h),
                 static_cast<std::size_t>(image.w)},
                std::move(vals));
            auto c1 = core::gelu(core::conv2d(img, ps_.at("pred/conv1/w"),
                                              ps_.at("pred/conv1/b"), 2, 1));
            auto c2 = core::gelu(core::conv2d(c1, ps_.at("pred/conv2/w"),
                                              ps_.at("pred/conv2/b"), 2, 1));
            auto flat = core::reshape(c2, {1, conv_flat_dim()});
            img_feat = core::reshape(core::linear(ps_, "pred/img", flat), {cfg_.d_model});
        }
        std::vector<S> flat_w(window.begin(), window.end());
        auto win = core::Tensor<S>::from_vector({1, cfg_.t_o * 6}, std::move(flat_w));
        auto force_feat =
            core::reshape(core::mlp_apply(ps_, "pred/force", win, {128, cfg_.d_model}),
                          {cfg_.d_model});
        auto joint = core::concat_cols<S>({core::reshape(img_feat, {1, cfg_.d_model}),
                                           core::reshape(force_feat, {1, cfg_.d_model})});
        auto logit = core::reshape(core::linear(ps_, "pred/out", joint), {1});
        double z = static_cast<double>(logit.item());
        double phi = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        return {logit, phi};
    }

    /// h_t = [h_s ; phi * h_f + (1 - phi) * h*]. Exact endpoints short-circuit
    /// so a hard 0/1 gate is bit-independent of the silenced branch.
    core::Tensor<S> fuse(const core::Tensor<S>& h_s, const core::Tensor<S>& h_f,
                         const core::Tensor<S>& phi) const {
        if (h_s.numel() != cfg_.d_model || h_f.numel() != cfg_.d_model)
            throw PolicyError("fuse: width mismatch");
        const auto& h_star = ps_.at("fuse/h_star");
        core::Tensor<S> second;
        if (!phi.requires_grad() && phi.item() == S(0)) {
            second = core::scale(h_star, S(1));
        } else if (!phi.requires_grad() && phi.item() == S(1)) {
            second = core::scale(h_f, S(1));
        } else {
            second = core::add(core::scale_by(h_f, phi),
                               core::scale_by(h_star, core::one_minus(phi)));
        }
        return concat_vec(h_s, second);
    }

    /// Full observation to (phi, conditioning) for the chosen fusion mode.
    PolicyOutput<S> forward(const data::TrainingSample& obs,
                            std::optional<double> phi_override = std::nullopt) const {
        PolicyOutput<S> out;
        switch (mode_) {
            case FusionMode::VisionOnly: {
                auto h_s = encode_scene(obs.cloud);
                out.conditioning = concat_vec(h_s, core::Tensor<S>::zeros({cfg_.d_model}));
                return out;
            }
            case FusionMode::ForceConcat: {
                auto h_s = encode_scene(obs.cloud);
                auto h_f = encode_force(obs.ft_window);
                out.conditioning = concat_vec(h_s, h_f);
                return out;
            }
            case FusionMode::ForceToken: {
                auto h_joint = encode_scene_with_force_tokens(obs.cloud, obs.ft_window);
                out.conditioning =
                    concat_vec(h_joint, core::Tensor<S>::zeros({cfg_.d_model}));
                return out;
            }
            case FusionMode::Gated:
            case FusionMode::Gated3dCls:
            case FusionMode::GatedMlpFt: {
                auto h_s = encode_scene(obs.cloud);
                auto h_f = encode_force(obs.ft_window);
                core::Tensor<S> phi_t;
                if (phi_override.has_value()) {
                    phi_t = core::Tensor<S>::from_vector(
                        {1}, {static_cast<S>(*phi_override)});
                    out.phi = *phi_override;
                } else {
                    auto [logit, phi] = predict_contact(
                        obs.image, obs.ft_window,
                        mode_ == FusionMode::Gated3dCls ? &h_s : nullptr);
                    out.logit = logit;
                    out.phi = phi;
                    phi_t = core::sigmoid(logit);
                }
                out.conditioning = fuse(h_s, h_f, phi_t);
                return out;
            }
        }
        throw PolicyError("invalid fusion mode");
    }

    std::size_t conv_flat_dim() const {
        auto conv_out = [](std::size_t v) { return (v + 2 - 3) / 2 + 1; };
        std::size_t h = conv_out(conv_out(cfg_.image_h));
        std::size_t w = conv_out(conv_out(cfg_.image_w));
        return 16 * h * w;
    }

    static core::Tensor<S> concat_vec(const core::Tensor<S>& a, const core::Tensor<S>& b) {
        auto joined = core::concat_cols<S>(
            {core::reshape(a, {1, a.numel()}), core::reshape(b, {1, b.numel()})});
        return core::reshape(joined, {a.numel() + b.numel()});
    }

private:
    /// Strided force tokens plus temporal sinusoidal encodings. The stride
    /// keeps the most recent sample and walks backward, so the newest reading
    /// is always represented.
    std::pair<core::Tensor<S>, core::Tensor<S>> force_tokens(
        const std::vector<float>& window, std::size_t stride) const {
        std::vector<std::size_t> rows;
        for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(cfg_.t_o) - 1; i >= 0;
             i -= static_cast<std::ptrdiff_t>(stride))
            rows.push_back(static_cast<std::size_t>(i));
        std::reverse(rows.begin(), rows.end());
        std::vector<S> vals;
        vals.reserve(rows.size() * 6);
        for (std::size_t r : rows)
            for (int c = 0; c < 6; ++c) vals.push_back(static_cast<S>(window[r * 6 + c]));
        auto raw = core::Tensor<S>::from_vector({rows.size(), 6}, std::move(vals));
        auto tokens = core::mlp_apply(ps_, "force/tok", raw, {64, 128, cfg_.d_model});
        const auto& pe_full = force_pe_;
        std::vector<S> pe_vals;
        pe_vals.reserve(rows.size() * cfg_.d_model);
        for (std::size_t r : rows)
            for (std::size_t c = 0; c < cfg_.d_model; ++c)
                pe_vals.push_back(pe_full.at(r, c));
        auto pe = core::Tensor<S>::from_vector({rows.size(), cfg_.d_model},
                                               std::move(pe_vals));
        return {tokens, pe};
    }

    core::Tensor<S> encode_scene_with_force_tokens(const std::vector<float>& cloud,
                                                   const std::vector<float>& window) const {
        if (cloud.empty()) throw PolicyError("encode_scene: empty cloud");
        std::size_t n = cloud.size() / 6;
        std::vector<S> vals(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) vals[i] = static_cast<S>(cloud[i]);
        auto points = core::Tensor<S>::from_vector({n, 6}, std::move(vals));
        auto feats = core::mlp_apply(ps_, "scene/pt", points, {cfg_.d_model, cfg_.d_model});
        auto [groups, centers] = voxel_groups(cloud);
        auto pooled = core::group_mean_rows(feats, groups);
        auto centers_t = core::Tensor<S>::from_vector({groups.size(), 3}, centers);
        auto scene_pos = core::linear(ps_, "scene/pos", centers_t);
        auto [ftoks, fpe] = force_tokens(window, cfg_.force_token_stride);
        auto tokens = core::concat_rows(pooled, ftoks);
        auto pos = core::concat_rows(scene_pos, fpe);
        return core::attention_encode(ps_, "scene/enc", tokens, pos,
                                      ps_.at("scene/readout"), attn_dims());
    }

    /// Voxel pooling groups over normalized coordinates. Voxels are visited
    /// in sorted key order and members sorted by content, which pins the
    /// accumulation order for any input permutation.
    std::pair<std::vector<std::vector<std::size_t>>, std::vector<S>> voxel_groups(
        const std::vector<float>& cloud) const {
        std::size_t n = cloud.size() / 6;
        double vox = cfg_.voxel_size;
        std::map<std::array<int, 3>, std::vector<std::size_t>> cells;
        for (std::size_t i = 0; i < n; ++i) {
            auto cell_of = [&](float v) {
                return static_cast<int>(std::floor((static_cast<double>(v) + 1.0) / vox));
            };
            cells[{cell_of(cloud[i * 6]), cell_of(cloud[i * 6 + 1]),
                   cell_of(cloud[i * 6 + 2])}]
                .push_back(i);
        }
        std::vector<std::vector<std::size_t>> groups;
        std::vector<S> centers;
        for (auto& [key, members] : cells) {
            std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
                for (int c = 0; c < 6; ++c) {
                    if (cloud[a * 6 + c] != cloud[b * 6 + c])
                        return cloud[a * 6 + c] < cloud[b * 6 + c];
                }
                return false;
            });
            groups.push_back(members);
            for (int c = 0; c < 3; ++c)
                centers.push_back(static_cast<S>((key[c] + 0.5) * vox - 1.0));
        }
        return {groups, centers};
    }

    PolicyConfig cfg_;
    FusionMode mode_;
    core::ParamStore<S> ps_;
    core::Tensor<S> force_pe_;
    core::Tensor<S> time_pe_;
};

}  // namespace foar::policy

#pragma once

#include <string>

#include "foar/io/json_config.hpp"

namespace foar::policy {

struct PolicyError : std::runtime_error {
    explicit PolicyError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Fusion variants: the gated design plus the ablation baselines.
enum class FusionMode {
    Gated,        // contact-gated convex blend with a learnable neutral embedding
    ForceToken,   // force tokens appended to scene tokens before the readout
    ForceConcat,  // [h_s; h_f] always
    VisionOnly,   // [h_s; 0]
    Gated3dCls,   // predictor consumes the scene feature instead of the image
    GatedMlpFt    // plain-MLP force encoder inside the gated design
};

inline std::string fusion_mode_name(FusionMode m) {
    switch (m) {
        case FusionMode::Gated: return "gated";
        case FusionMode::ForceToken: return "force_token";
        case FusionMode::ForceConcat: return "force_concat";
        case FusionMode::VisionOnly: return "vision_only";
        case FusionMode::Gated3dCls: return "gated_3dcls";
        case FusionMode::GatedMlpFt: return "gated_mlp_ft";
    }
    return "?";
}

inline FusionMode fusion_mode_from_name(const std::string& s) {
    if (s == "gated") return FusionMode::Gated;
    if (s == "force_token") return FusionMode::ForceToken;
    if (s == "force_concat") return FusionMode::ForceConcat;
    if (s == "vision_only") return FusionMode::VisionOnly;
    if (s == "gated_3dcls") return FusionMode::Gated3dCls;
    if (s == "gated_mlp_ft") return FusionMode::GatedMlpFt;
    throw PolicyError("unknown fusion mode: " + s);
}

inline bool mode_has_predictor(FusionMode m) {
    return m == FusionMode::Gated || m == FusionMode::Gated3dCls ||
           m == FusionMode::GatedMlpFt;
}

inline bool mode_uses_force(FusionMode m) { return m != FusionMode::VisionOnly; }

struct PolicyConfig {
    std::size_t d_model = 64;  // desk-scale width (512 at paper scale)
    std::size_t t_o = 200;
    std::size_t t_a = 20;
    std::size_t ddpm_train_steps = 100;
    std::size_t ddim_infer_steps = 20;
    double alpha = 0.1;
    std::string fusion_mode = "gated";

    std::size_t n_heads = 4;
    std::size_t n_blocks = 2;       // paper uses 4+1 at full scale
    std::size_t d_ff = 128;
    std::size_t force_stride = 2;   // desk-scale temporal subsampling inside the encoder
    std::size_t force_token_stride = 10;  // force_token mode appends every k-th token
    double voxel_size = 0.25;       // in normalized units; 5 mm analog
    std::size_t head_hidden = 384;
    std::size_t time_embed_dim = 32;
    double beta_lo = 1e-4, beta_hi = 2e-2;
    double xt_dropout = 0.3;  // chance the noisy-chunk input is masked in training
    std::size_t image_h = 32, image_w = 32, image_c = 3;

    FusionMode mode() const { return fusion_mode_from_name(fusion_mode); }
    std::size_t chunk_dim() const { return t_a * 8; }

    void validate() const {
        if (ddim_infer_steps > ddpm_train_steps)
            throw PolicyError("PolicyConfig: ddim_infer_steps must be <= ddpm_train_steps");
        if (t_a == 0 || t_o == 0 || d_model == 0)
            throw PolicyError("PolicyConfig: zero dimension");
        if (d_model % n_heads != 0)
            throw PolicyError("PolicyConfig: d_model must be divisible by n_heads");
        if (force_stride == 0 || force_token_stride == 0)
            throw PolicyError("PolicyConfig: strides must be >= 1");
        fusion_mode_from_name(fusion_mode);
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    PolicyConfig, d_model, t_o, t_a, ddpm_train_steps, ddim_infer_steps, alpha,
    fusion_mode, n_heads, n_blocks, d_ff, force_stride, force_token_stride, voxel_size,
    head_hidden, time_embed_dim, beta_lo, beta_hi, xt_dropout, image_h, image_w,
    image_c)

}  // namespace foar::policy

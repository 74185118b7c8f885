#pragma once

#include <map>
#include <string>
#include <vector>

#include "foar/core/tensor.hpp"

namespace foar::core {

/// Named trainable parameters with deterministic (lexicographic) iteration.
template <class S>
class ParamStore {
public:
    Tensor<S>& add(const std::string& name, Tensor<S> t) {
        auto [it, inserted] = params_.emplace(name, std::move(t));
        if (!inserted) throw DimensionError("ParamStore: duplicate parameter " + name);
        it->second.set_requires_grad(true);
        return it->second;
    }

    Tensor<S>& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end())
            throw DimensionError("ParamStore: missing parameter " + name);
        return it->second;
    }

    const Tensor<S>& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end())
            throw DimensionError("ParamStore: missing parameter " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    void zero_grad() {
        for (auto& [name, t] : params_) t.zero_grad();
    }

    std::size_t total_elements() const {
        std::size_t n = 0;
        for (const auto& [name, t] : params_) n += t.numel();
        return n;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }
    std::size_t size() const { return params_.size(); }

private:
    std::map<std::string, Tensor<S>> params_;
};

/// Uniform fan-in init for a linear layer: W (in,out) plus zero bias.
template <class S>
void init_linear(ParamStore<S>& ps, const std::string& prefix, std::size_t in,
                 std::size_t out, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    ps.add(prefix + "/w", Tensor<S>::randu({in, out}, rng, -bound, bound));
    ps.add(prefix + "/b", Tensor<S>::zeros({out}));
}

template <class S>
Tensor<S> linear(const ParamStore<S>& ps, const std::string& prefix, const Tensor<S>& x) {
    return add_row_bias(matmul(x, ps.at(prefix + "/w")), ps.at(prefix + "/b"));
}

template <class S>
void mlp_init(ParamStore<S>& ps, const std::string& prefix, std::size_t in,
              const std::vector<std::size_t>& layer_dims, Rng& rng) {
    std::size_t cur = in;
    for (std::size_t i = 0; i < layer_dims.size(); ++i) {
        init_linear(ps, prefix + "/l" + std::to_string(i), cur, layer_dims[i], rng);
        cur = layer_dims[i];
    }
}

/// Stacked linear layers with GELU between them (none after the last).
/// x is (T, d_in); output (T, layer_dims.back()).
template <class S>
Tensor<S> mlp_apply(const ParamStore<S>& ps, const std::string& prefix, Tensor<S> x,
                    const std::vector<std::size_t>& layer_dims) {
    if (x.rank() != 2) throw DimensionError("mlp_apply: input must be rank-2");
    if (layer_dims.empty()) throw DimensionError("mlp_apply: no layers");
    for (std::size_t i = 0; i < layer_dims.size(); ++i) {
        const auto& w = ps.at(prefix + "/l" + std::to_string(i) + "/w");
        if (x.dim(1) != w.dim(0))
            throw DimensionError("mlp_apply: layer " + std::to_string(i) + " expects width " +
                                 std::to_string(w.dim(0)) + ", got " + std::to_string(x.dim(1)));
        x = linear(ps, prefix + "/l" + std::to_string(i), x);
        if (i + 1 < layer_dims.size()) x = gelu(x);
    }
    return x;
}

/// pe[t, 2i] = sin(t / 10000^(2i/d)), pe[t, 2i+1] = cos(t / 10000^(2i/d)).
template <class S>
Tensor<S> sinusoidal_pe(std::size_t t_len, std::size_t d) {
    if (d % 2 != 0) throw DimensionError("sinusoidal_pe: width must be even");
    Tensor<S> pe({t_len, d});
    for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t i = 0; i < d / 2; ++i) {
            double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
            double arg = static_cast<double>(t) * freq;
            pe.value_mut()[t * d + 2 * i] = static_cast<S>(std::sin(arg));
            pe.value_mut()[t * d + 2 * i + 1] = static_cast<S>(std::cos(arg));
        }
    return pe;
}

struct AttentionDims {
    std::size_t d_model;
    std::size_t n_heads = 4;
    std::size_t d_ff;
    std::size_t n_blocks = 2;
};

template <class S>
void attention_init(ParamStore<S>& ps, const std::string& prefix, const AttentionDims& dims,
                    Rng& rng) {
    for (std::size_t b = 0; b < dims.n_blocks; ++b) {
        std::string p = prefix + "/blk" + std::to_string(b);
        init_linear(ps, p + "/q", dims.d_model, dims.d_model, rng);
        init_linear(ps, p + "/k", dims.d_model, dims.d_model, rng);
        init_linear(ps, p + "/v", dims.d_model, dims.d_model, rng);
        init_linear(ps, p + "/o", dims.d_model, dims.d_model, rng);
        ps.add(p + "/ln1/g", Tensor<S>::full({dims.d_model}, S(1)));
        ps.add(p + "/ln1/b", Tensor<S>::zeros({dims.d_model}));
        init_linear(ps, p + "/ff1", dims.d_model, dims.d_ff, rng);
        init_linear(ps, p + "/ff2", dims.d_ff, dims.d_model, rng);
        ps.add(p + "/ln2/g", Tensor<S>::full({dims.d_model}, S(1)));
        ps.add(p + "/ln2/b", Tensor<S>::zeros({dims.d_model}));
    }
}

template <class S>
Tensor<S> multi_head_attention(const ParamStore<S>& ps, const std::string& prefix,
                               const Tensor<S>& x, std::size_t n_heads) {
    std::size_t d = x.dim(1);
    if (d % n_heads != 0) throw DimensionError("attention: d_model not divisible by heads");
    std::size_t dh = d / n_heads;
    Tensor<S> q = linear(ps, prefix + "/q", x);
    Tensor<S> k = linear(ps, prefix + "/k", x);
    Tensor<S> v = linear(ps, prefix + "/v", x);
    std::vector<Tensor<S>> heads;
    S inv_sqrt_dh = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
    for (std::size_t h = 0; h < n_heads; ++h) {
        Tensor<S> qh = slice_cols(q, h * dh, (h + 1) * dh);
        Tensor<S> kh = slice_cols(k, h * dh, (h + 1) * dh);
        Tensor<S> vh = slice_cols(v, h * dh, (h + 1) * dh);
        Tensor<S> scores = scale(matmul(qh, kh, false, true), inv_sqrt_dh);
        heads.push_back(matmul(softmax_rows(scores), vh));
    }
    return linear(ps, prefix + "/o", n_heads == 1 ? heads[0] : concat_cols(heads));
}

template <class S>
Tensor<S> transformer_block(const ParamStore<S>& ps, const std::string& prefix,
                            Tensor<S> x, std::size_t n_heads) {
    Tensor<S> attn = multi_head_attention(ps, prefix, x, n_heads);
    x = layer_norm_rows(add(x, attn), ps.at(prefix + "/ln1/g"), ps.at(prefix + "/ln1/b"));
    Tensor<S> ff = linear(ps, prefix + "/ff2", gelu(linear(ps, prefix + "/ff1", x)));
    x = layer_norm_rows(add(x, ff), ps.at(prefix + "/ln2/g"), ps.at(prefix + "/ln2/b"));
    return x;
}

namespace detail {

/// Canonical row order: sort token indices by (token row, pos row) content.
/// Equal pairs tie-break by index; downstream float sums then depend only on
/// the multiset of rows, so a permuted input reproduces the output exactly.
template <class S>
std::vector<std::size_t> canonical_row_order(const Tensor<S>& tokens, const Tensor<S>& pos) {
    std::size_t t = tokens.dim(0), d = tokens.dim(1);
    const auto& tv = tokens.value();
    const auto& pv = pos.value();
    std::vector<std::size_t> idx(t);
    for (std::size_t i = 0; i < t; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        for (std::size_t c = 0; c < d; ++c) {
            if (tv[a * d + c] != tv[b * d + c]) return tv[a * d + c] < tv[b * d + c];
        }
        for (std::size_t c = 0; c < d; ++c) {
            if (pv[a * d + c] != pv[b * d + c]) return pv[a * d + c] < pv[b * d + c];
        }
        return a < b;
    });
    return idx;
}

}  // namespace detail

/// Transformer encoder over tokens with additive positional encodings; the
/// learnable readout token is prepended and its final embedding returned.
template <class S>
Tensor<S> attention_encode(const ParamStore<S>& ps, const std::string& prefix,
                           const Tensor<S>& tokens, const Tensor<S>& pos_enc,
                           const Tensor<S>& readout, const AttentionDims& dims) {
    if (tokens.rank() != 2 || tokens.dim(0) == 0)
        throw DimensionError("attention_encode: empty token sequence");
    if (tokens.shape() != pos_enc.shape())
        throw DimensionError("attention_encode: pos_enc shape mismatch");
    if (tokens.dim(1) != dims.d_model || readout.numel() != dims.d_model)
        throw DimensionError("attention_encode: width mismatch");
    auto order = detail::canonical_row_order(tokens, pos_enc);
    Tensor<S> x = add(gather_rows(tokens, order), gather_rows(pos_enc, order));
    x = concat_rows(reshape(readout, {1, dims.d_model}), x);
    for (std::size_t b = 0; b < dims.n_blocks; ++b)
        x = transformer_block(ps, prefix + "/blk" + std::to_string(b), x, dims.n_heads);
    return reshape(slice_rows(x, 0, 1), {dims.d_model});
}

}  // namespace foar::core

// Temporal encoder: learnable positional encodings, a stack of pre-norm
// transformer layers, a global residual around the stack, and masked mean
// pooling down to one clip embedding.
//
// Layer order is pre-norm: H <- H + MHA(LN(H)), then H <- H + MLP(LN(H)),
// with MLP(x) = W2 * GELU(W1 * x) and a 4x hidden expansion. The global
// residual adds the *projected* frame features (before positional
// encodings) back onto the stack output, so with identity layers the
// pooled embedding is exactly twice the pooled projection.

#pragma once

#include <cstdint>
#include <vector>

#include "tempret/kernels.hpp"
#include "tempret/matrix.hpp"

namespace tempret {

/// One clip's ingested frame features plus validity mask.
struct FrameSequence {
    Matrix features;  // T x D_in
    Mask mask;        // length T, 1 = valid

    void validate() const {
        if (features.rows() == 0) throw DimensionError("FrameSequence: empty sequence");
        if (mask.size() != features.rows()) {
            throw DimensionError("FrameSequence: mask length != frame count");
        }
        if (count_valid(mask) == 0) {
            throw DegenerateMaskError("FrameSequence: no valid frames");
        }
    }
};

struct TransformerLayerParams {
    std::vector<double> ln1_gamma, ln1_beta;
    AttentionParams attn;
    std::vector<double> ln2_gamma, ln2_beta;
    Matrix mlp_w1;  // 4D x D, applied as U = X * W1^T
    Matrix mlp_w2;  // D x 4D, applied as Y = G * W2^T
};

struct TransformerLayerGrads {
    std::vector<double> ln1_gamma, ln1_beta;
    AttentionGrads attn;
    std::vector<double> ln2_gamma, ln2_beta;
    Matrix mlp_w1, mlp_w2;

    static TransformerLayerGrads zeros_like(const TransformerLayerParams& p) {
        TransformerLayerGrads g;
        g.ln1_gamma.assign(p.ln1_gamma.size(), 0.0);
        g.ln1_beta.assign(p.ln1_beta.size(), 0.0);
        g.attn = AttentionGrads::zeros_like(p.attn);
        g.ln2_gamma.assign(p.ln2_gamma.size(), 0.0);
        g.ln2_beta.assign(p.ln2_beta.size(), 0.0);
        g.mlp_w1 = Matrix(p.mlp_w1.rows(), p.mlp_w1.cols());
        g.mlp_w2 = Matrix(p.mlp_w2.rows(), p.mlp_w2.cols());
        return g;
    }
};

struct TransformerLayerCache {
    Matrix input;  // H
    LayerNormCache ln1;
    AttentionCache attn;
    Matrix h_mid;   // H + attention output
    LayerNormCache ln2;
    Matrix mlp_in;   // T x D, the LN2 output fed into the MLP
    Matrix mlp_pre;  // T x 4D, before GELU
    Matrix mlp_act;  // T x 4D, after GELU
};

constexpr double kLayerNormEps = 1e-5;

inline Matrix transformer_layer_forward(const Matrix& h, const TransformerLayerParams& p,
                                        const Mask& mask, GeluKind gelu_kind = GeluKind::Tanh,
                                        TransformerLayerCache* cache = nullptr) {
    LayerNormCache ln1_cache;
    Matrix normed = layer_norm_rows(h, p.ln1_gamma, p.ln1_beta, kLayerNormEps,
                                    cache ? &ln1_cache : nullptr);
    AttentionCache attn_cache;
    Matrix attn_out = attention_forward(normed, p.attn, mask, cache ? &attn_cache : nullptr);
    Matrix h_mid = add(h, attn_out);

    LayerNormCache ln2_cache;
    Matrix normed2 = layer_norm_rows(h_mid, p.ln2_gamma, p.ln2_beta, kLayerNormEps,
                                     cache ? &ln2_cache : nullptr);
    Matrix pre = matmul_bt(normed2, p.mlp_w1);  // T x 4D
    Matrix act(pre.rows(), pre.cols());
    for (std::size_t i = 0; i < pre.size(); ++i) {
        act.data()[i] = gelu(pre.data()[i], gelu_kind);
    }
    Matrix mlp_out = matmul_bt(act, p.mlp_w2);  // T x D
    Matrix out = add(h_mid, mlp_out);

    if (cache) {
        cache->input = h;
        cache->ln1 = std::move(ln1_cache);
        cache->attn = std::move(attn_cache);
        cache->h_mid = h_mid;
        cache->ln2 = std::move(ln2_cache);
        cache->mlp_in = std::move(normed2);
        cache->mlp_pre = std::move(pre);
        cache->mlp_act = std::move(act);
    }
    return out;
}

/// Public op: one pre-norm transformer layer.
inline Matrix transformer_layer(const Matrix& h, const TransformerLayerParams& p,
                                const Mask& mask, GeluKind gelu_kind = GeluKind::Tanh) {
    return transformer_layer_forward(h, p, mask, gelu_kind);
}

inline Matrix transformer_layer_backward(const Matrix& d_out, const TransformerLayerParams& p,
                                         const TransformerLayerCache& cache,
                                         TransformerLayerGrads& grads,
                                         GeluKind gelu_kind = GeluKind::Tanh) {
    // out = h_mid + act * W2^T
    add_in_place(grads.mlp_w2, matmul_at(d_out, cache.mlp_act));
    Matrix d_act = matmul(d_out, p.mlp_w2);
    Matrix d_pre(d_act.rows(), d_act.cols());
    for (std::size_t i = 0; i < d_act.size(); ++i) {
        d_pre.data()[i] = d_act.data()[i] * gelu_grad(cache.mlp_pre.data()[i], gelu_kind);
    }
    add_in_place(grads.mlp_w1, matmul_at(d_pre, cache.mlp_in));
    Matrix d_normed2 = matmul(d_pre, p.mlp_w1);
    Matrix d_h_mid = layer_norm_rows_backward(d_normed2, p.ln2_gamma, cache.ln2,
                                              grads.ln2_gamma, grads.ln2_beta);
    add_in_place(d_h_mid, d_out);  // residual

    // h_mid = input + attn(LN(input))
    Matrix d_attn_in = attention_backward(d_h_mid, p.attn, cache.attn, grads.attn);
    Matrix d_input = layer_norm_rows_backward(d_attn_in, p.ln1_gamma, cache.ln1,
                                              grads.ln1_gamma, grads.ln1_beta);
    add_in_place(d_input, d_h_mid);  // residual
    return d_input;
}

// ---------------------------------------------------------------------------
// pooling
// ---------------------------------------------------------------------------

/// Masked mean over the temporal dimension.
inline std::vector<double> masked_mean_pool(const Matrix& x, const Mask& mask) {
    if (mask.size() != x.rows()) {
        throw DimensionError("masked_mean_pool: mask length != row count");
    }
    const std::size_t valid = count_valid(mask);
    if (valid == 0) throw DegenerateMaskError("masked_mean_pool: all-zero mask");
    std::vector<double> out(x.cols(), 0.0);
    for (std::size_t t = 0; t < x.rows(); ++t) {
        if (!mask[t]) continue;
        const double* row = x.row(t);
        for (std::size_t c = 0; c < x.cols(); ++c) out[c] += row[c];
    }
    const double inv = 1.0 / static_cast<double>(valid);
    for (double& v : out) v *= inv;
    return out;
}

// ---------------------------------------------------------------------------
// full encoder
// ---------------------------------------------------------------------------

struct TemporalEncoderParams {
    Matrix pos_encoding;  // T_max x D, learnable
    std::vector<TransformerLayerParams> layers;
    std::size_t heads = 1;
    GeluKind gelu_kind = GeluKind::Tanh;

    std::size_t dim() const { return pos_encoding.cols(); }
    std::size_t t_max() const { return pos_encoding.rows(); }
};

/// output[t] = x[t] + p[t] for the first T rows of P.
inline Matrix add_positional_encoding(const Matrix& x, const Matrix& p) {
    if (x.rows() > p.rows()) {
        throw CapacityError("add_positional_encoding: sequence length " +
                            std::to_string(x.rows()) + " exceeds T_max " +
                            std::to_string(p.rows()));
    }
    if (x.cols() != p.cols()) {
        throw DimensionError("add_positional_encoding: dim mismatch");
    }
    Matrix out = x;
    for (std::size_t t = 0; t < x.rows(); ++t) {
        for (std::size_t c = 0; c < x.cols(); ++c) out(t, c) += p(t, c);
    }
    return out;
}

struct EncodeVideoCache {
    Matrix features;   // raw input frames, T x D_in
    Mask mask;
    Matrix projected;  // X = F * W_proj, T x D
    std::vector<TransformerLayerCache> layers;
};

/// Encode one clip: project, add positions, run the layer stack, add the
/// global residual, masked-mean pool.
inline std::vector<double> encode_video_forward(const FrameSequence& seq, const Matrix& proj,
                                                const TemporalEncoderParams& params,
                                                EncodeVideoCache* cache = nullptr) {
    seq.validate();
    if (seq.features.cols() != proj.rows()) {
        throw DimensionError("encode_video: feature dim " + std::to_string(seq.features.cols()) +
                             " != projection rows " + std::to_string(proj.rows()));
    }
    Matrix projected = matmul(seq.features, proj);  // T x D
    Matrix h = add_positional_encoding(projected, params.pos_encoding);
    if (cache) {
        cache->features = seq.features;
        cache->mask = seq.mask;
        cache->projected = projected;
        cache->layers.assign(params.layers.size(), TransformerLayerCache{});
    }
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        h = transformer_layer_forward(h, params.layers[l], seq.mask, params.gelu_kind,
                                      cache ? &cache->layers[l] : nullptr);
    }
    add_in_place(h, projected);  // global residual around the whole stack
    return masked_mean_pool(h, seq.mask);
}

inline std::vector<double> encode_video(const FrameSequence& seq, const Matrix& proj,
                                        const TemporalEncoderParams& params) {
    return encode_video_forward(seq, proj, params);
}

struct TemporalEncoderGrads {
    Matrix pos_encoding;
    std::vector<TransformerLayerGrads> layers;

    static TemporalEncoderGrads zeros_like(const TemporalEncoderParams& p) {
        TemporalEncoderGrads g;
        g.pos_encoding = Matrix(p.pos_encoding.rows(), p.pos_encoding.cols());
        g.layers.reserve(p.layers.size());
        for (const auto& layer : p.layers) {
            g.layers.push_back(TransformerLayerGrads::zeros_like(layer));
        }
        return g;
    }
};

/// Backward through encode_video. Accumulates gradients for the projection,
/// positional encodings, and every layer.
inline void encode_video_backward(const std::vector<double>& d_embedding, const Matrix& proj,
                                  const TemporalEncoderParams& params,
                                  const EncodeVideoCache& cache, Matrix& d_proj,
                                  TemporalEncoderGrads& grads) {
    const std::size_t t = cache.features.rows();
    const std::size_t d = params.dim();
    if (d_embedding.size() != d) {
        throw DimensionError("encode_video_backward: gradient length != D");
    }
    const std::size_t valid = count_valid(cache.mask);
    const double inv = 1.0 / static_cast<double>(valid);

    // pooled = sum_t m_t h_t / sum m
    Matrix dh(t, d);
    for (std::size_t r = 0; r < t; ++r) {
        if (!cache.mask[r]) continue;
        for (std::size_t c = 0; c < d; ++c) dh(r, c) = d_embedding[c] * inv;
    }

    Matrix d_projected = dh;  // global residual path
    for (std::size_t l = params.layers.size(); l > 0; --l) {
        dh = transformer_layer_backward(dh, params.layers[l - 1], cache.layers[l - 1],
                                        grads.layers[l - 1], params.gelu_kind);
    }
    // dh is now the gradient at (projected + positional)
    for (std::size_t r = 0; r < t; ++r) {
        for (std::size_t c = 0; c < d; ++c) grads.pos_encoding(r, c) += dh(r, c);
    }
    add_in_place(d_projected, dh);
    add_in_place(d_proj, matmul_at(cache.features, d_projected));
}

/// Uniform temporal sampling down to at most t_max frames. Sequences that
/// already fit are returned unchanged.
inline FrameSequence sample_frames(const FrameSequence& seq, std::size_t t_max) {
    seq.validate();
    const std::size_t t = seq.features.rows();
    if (t <= t_max) return seq;
    FrameSequence out;
    out.features = Matrix(t_max, seq.features.cols());
    out.mask.assign(t_max, 0);
    for (std::size_t i = 0; i < t_max; ++i) {
        // midpoint of the i-th of t_max equal spans
        const std::size_t src = (2 * i + 1) * t / (2 * t_max);
        out.features.set_row(i, seq.features.row_vector(src));
        out.mask[i] = seq.mask[src];
    }
    if (count_valid(out.mask) == 0) {
        // All sampled frames were padding; fall back to the first valid frame.
        for (std::size_t src = 0; src < t; ++src) {
            if (seq.mask[src]) {
                out.features.set_row(0, seq.features.row_vector(src));
                out.mask[0] = 1;
                break;
            }
        }
    }
    return out;
}

} // namespace tempret

// Stage-2 reranking: a small cross-encoder over [video; text] embedding
// pairs with a binary ITM head, miss penalty for non-candidates, per-row
// min-max normalization, and residual score fusion.
//
// The cross-encoder treats the two pooled embeddings as a 2-token sequence,
// adds role (type) embeddings so video and text positions are
// distinguishable, runs a short transformer stack, and reads token 0.
// Non-candidates never receive a fabricated score: a presence flag marks
// scored entries, and the miss penalty later assigns absent entries the
// per-row minimum of the scored ones.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tempret/errors.hpp"
#include "tempret/matrix.hpp"
#include "tempret/retrieval_space.hpp"
#include "tempret/rng.hpp"
#include "tempret/sms_objective.hpp"
#include "tempret/temporal_encoder.hpp"

namespace tempret {

struct CrossEncoderParams {
    Matrix type_video;  // 1 x D, added to the video token
    Matrix type_text;   // 1 x D, added to the text token
    std::vector<TransformerLayerParams> layers;
    Matrix itm_weight;  // 2 x D
    Matrix itm_bias;    // 1 x 2
    std::size_t heads = 1;
    GeluKind gelu_kind = GeluKind::Tanh;

    std::size_t dim() const { return type_video.cols(); }
};

struct CrossEncoderGrads {
    Matrix type_video, type_text;
    std::vector<TransformerLayerGrads> layers;
    Matrix itm_weight, itm_bias;

    static CrossEncoderGrads zeros_like(const CrossEncoderParams& p) {
        CrossEncoderGrads g;
        g.type_video = Matrix(1, p.dim());
        g.type_text = Matrix(1, p.dim());
        for (const auto& layer : p.layers) {
            g.layers.push_back(TransformerLayerGrads::zeros_like(layer));
        }
        g.itm_weight = Matrix(p.itm_weight.rows(), p.itm_weight.cols());
        g.itm_bias = Matrix(1, 2);
        return g;
    }
};

struct CrossEncoderCache {
    std::vector<TransformerLayerCache> layers;
    std::vector<double> output;  // token 0 after the stack
};

/// Joint encoding of one (video, text) embedding pair. Token order is fixed
/// as [video; text]; symmetry is neither required nor provided.
inline std::vector<double> cross_encode_forward(const std::vector<double>& video,
                                                const std::vector<double>& text,
                                                const CrossEncoderParams& params,
                                                CrossEncoderCache* cache = nullptr) {
    const std::size_t d = params.dim();
    if (video.size() != d || text.size() != d) {
        throw DimensionError("cross_encode: embedding length != model dim");
    }
    Matrix h(2, d);
    for (std::size_t c = 0; c < d; ++c) {
        h(0, c) = video[c] + params.type_video(0, c);
        h(1, c) = text[c] + params.type_text(0, c);
    }
    const Mask mask = {1, 1};
    if (cache) cache->layers.assign(params.layers.size(), TransformerLayerCache{});
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        h = transformer_layer_forward(h, params.layers[l], mask, params.gelu_kind,
                                      cache ? &cache->layers[l] : nullptr);
    }
    std::vector<double> out = h.row_vector(0);
    if (cache) cache->output = out;
    return out;
}

inline std::vector<double> cross_encode(const std::vector<double>& video,
                                        const std::vector<double>& text,
                                        const CrossEncoderParams& params) {
    return cross_encode_forward(video, text, params);
}

/// Matching probability: softmax over the two ITM logits, index 1.
inline double itm_score(const std::vector<double>& o, const CrossEncoderParams& params) {
    if (o.size() != params.itm_weight.cols()) {
        throw DimensionError("itm_score: feature length != head width");
    }
    double l0 = params.itm_bias(0, 0);
    double l1 = params.itm_bias(0, 1);
    for (std::size_t c = 0; c < o.size(); ++c) {
        l0 += params.itm_weight(0, c) * o[c];
        l1 += params.itm_weight(1, c) * o[c];
    }
    // stabilized two-way softmax
    const double mx = std::max(l0, l1);
    const double e0 = std::exp(l0 - mx);
    const double e1 = std::exp(l1 - mx);
    return e1 / (e0 + e1);
}

/// Backward through head + stack for one pair. d_loss_d_logit1 is the
/// gradient on logit 1 minus logit 0 direction, expressed as dlogits.
inline void cross_encode_backward(const std::vector<double>& dlogits,  // length 2
                                  const CrossEncoderParams& params,
                                  const CrossEncoderCache& cache, CrossEncoderGrads& grads) {
    const std::size_t d = params.dim();
    // logits = itm_weight * o + bias
    std::vector<double> d_o(d, 0.0);
    for (std::size_t k = 0; k < 2; ++k) {
        grads.itm_bias(0, k) += dlogits[k];
        for (std::size_t c = 0; c < d; ++c) {
            grads.itm_weight(k, c) += dlogits[k] * cache.output[c];
            d_o[c] += dlogits[k] * params.itm_weight(k, c);
        }
    }
    Matrix dh(2, d);
    for (std::size_t c = 0; c < d; ++c) dh(0, c) = d_o[c];
    for (std::size_t l = params.layers.size(); l > 0; --l) {
        dh = transformer_layer_backward(dh, params.layers[l - 1], cache.layers[l - 1],
                                        grads.layers[l - 1], params.gelu_kind);
    }
    for (std::size_t c = 0; c < d; ++c) {
        grads.type_video(0, c) += dh(0, c);
        grads.type_text(0, c) += dh(1, c);
    }
}

// ---------------------------------------------------------------------------
// partial score matrix and fusion
// ---------------------------------------------------------------------------

/// Score matrix in which only scored (candidate) entries are present.
struct PartialScoreMatrix {
    Matrix values;
    std::vector<std::uint8_t> present;

    PartialScoreMatrix() = default;
    PartialScoreMatrix(std::size_t rows, std::size_t cols)
        : values(rows, cols), present(rows * cols, 0) {}

    bool is_present(std::size_t r, std::size_t c) const {
        return present[r * values.cols() + c] != 0;
    }
    void set(std::size_t r, std::size_t c, double v) {
        values(r, c) = v;
        present[r * values.cols() + c] = 1;
    }
};

/// Replace absent entries with the per-row minimum over present entries.
inline ScoreMatrix apply_miss_penalty(const PartialScoreMatrix& p) {
    const std::size_t rows = p.values.rows();
    const std::size_t cols = p.values.cols();
    ScoreMatrix out = p.values;
    for (std::size_t r = 0; r < rows; ++r) {
        double row_min = 0.0;
        bool any = false;
        for (std::size_t c = 0; c < cols; ++c) {
            if (!p.is_present(r, c)) continue;
            row_min = any ? std::min(row_min, p.values(r, c)) : p.values(r, c);
            any = true;
        }
        if (!any) {
            throw DegenerateRowError("apply_miss_penalty: row " + std::to_string(r) +
                                     " has no scored entries");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (!p.is_present(r, c)) out(r, c) = row_min;
        }
    }
    return out;
}

/// Per-row min-max to [0, 1]; constant rows map to all 0.5.
inline ScoreMatrix normalize_rows(const ScoreMatrix& s) {
    ScoreMatrix out(s.rows(), s.cols());
    for (std::size_t r = 0; r < s.rows(); ++r) {
        const double* row = s.row(r);
        double lo = row[0], hi = row[0];
        for (std::size_t c = 1; c < s.cols(); ++c) {
            lo = std::min(lo, row[c]);
            hi = std::max(hi, row[c]);
        }
        const double range = hi - lo;
        for (std::size_t c = 0; c < s.cols(); ++c) {
            out(r, c) = range > 0.0 ? (row[c] - lo) / range : 0.5;
        }
    }
    return out;
}

/// S_final = itm_norm + alpha * init_norm.
inline ScoreMatrix fuse_scores(const ScoreMatrix& itm_norm, const ScoreMatrix& init_norm,
                               double alpha) {
    require_same_shape(itm_norm, init_norm, "fuse_scores");
    ScoreMatrix out = itm_norm;
    axpy_in_place(out, alpha, init_norm);
    return out;
}

// ---------------------------------------------------------------------------
// full rerank pass
// ---------------------------------------------------------------------------

enum class RerankDirection {
    TextToVideo,  // rows are text queries, columns are video candidates
    VideoToText,  // rows are video queries, columns are caption candidates
};

struct RerankStats {
    std::size_t cross_encoder_evals = 0;
};

/// Two-stage rerank of one direction. `s_init` must already be oriented so
/// rows are queries for the requested direction (pass the transpose of the
/// T2V matrix for V2T). Row/column embeddings follow that orientation; the
/// cross-encoder always receives its tokens in [video; text] order.
inline ScoreMatrix rerank(const ScoreMatrix& s_init, const EmbeddingMatrix& videos,
                          const EmbeddingMatrix& texts, const CrossEncoderParams& params,
                          std::size_t k, double alpha,
                          RerankDirection direction = RerankDirection::TextToVideo,
                          RerankStats* stats = nullptr) {
    const EmbeddingMatrix& row_embs = direction == RerankDirection::TextToVideo ? texts : videos;
    const EmbeddingMatrix& col_embs = direction == RerankDirection::TextToVideo ? videos : texts;
    if (s_init.rows() != row_embs.count() || s_init.cols() != col_embs.count()) {
        throw DimensionError("rerank: score matrix shape does not match embeddings");
    }

    const CandidateSet candidates = top_k(s_init, k);
    PartialScoreMatrix itm(s_init.rows(), s_init.cols());
    for (std::size_t r = 0; r < s_init.rows(); ++r) {
        const std::vector<double> row_vec = row_embs.data.row_vector(r);
        for (std::size_t c : candidates.rows[r]) {
            const std::vector<double> col_vec = col_embs.data.row_vector(c);
            const std::vector<double>& video_vec =
                direction == RerankDirection::TextToVideo ? col_vec : row_vec;
            const std::vector<double>& text_vec =
                direction == RerankDirection::TextToVideo ? row_vec : col_vec;
            const std::vector<double> o = cross_encode(video_vec, text_vec, params);
            itm.set(r, c, itm_score(o, params));
            if (stats) ++stats->cross_encoder_evals;
        }
    }
    const ScoreMatrix itm_full = apply_miss_penalty(itm);
    return fuse_scores(normalize_rows(itm_full), normalize_rows(s_init), alpha);
}

// ---------------------------------------------------------------------------
// ITM training
// ---------------------------------------------------------------------------

struct ItmTrainConfig {
    double theta_pos = 0.5;  // R >= theta_pos are positives
    double theta_neg = 0.1;  // R <= theta_neg are negatives
    std::size_t steps = 300;
    std::size_t batch = 64;  // split evenly between positives and negatives
    double lr = 1e-3;
    std::uint64_t seed = 1;
    AdamWConfig adam{};

    void validate() const {
        if (!(theta_neg >= 0.0 && theta_neg < theta_pos && theta_pos <= 1.0)) {
            throw ConfigError("ItmTrainConfig: need 0 <= theta_neg < theta_pos <= 1");
        }
        if (batch < 2) throw ConfigError("ItmTrainConfig: batch must be >= 2");
    }
};

namespace detail {

struct CrossAdamState {
    CrossEncoderGrads m, v;
    std::size_t step = 0;
};

/// Apply one AdamW step to every cross-encoder tensor with a shared lr.
inline void cross_adamw_step(CrossEncoderParams& p, const CrossEncoderGrads& g,
                             CrossAdamState& st, double lr, const AdamWConfig& cfg);

} // namespace detail

/// Train the cross-encoder + ITM head with balanced binary cross-entropy on
/// pairs sampled from the relevance matrix. Embeddings are fixed inputs.
/// Returns the per-step mean BCE loss (empty when steps == 0, in which case
/// the parameters are untouched).
inline std::vector<double> train_itm(CrossEncoderParams& params, const EmbeddingMatrix& videos,
                                     const EmbeddingMatrix& texts, const RelevanceMatrix& r,
                                     const ItmTrainConfig& cfg) {
    cfg.validate();
    if (r.rows() != texts.count() || r.cols() != videos.count()) {
        throw DimensionError("train_itm: relevance shape does not match embeddings");
    }
    if (cfg.steps == 0) return {};

    // Positive pairs are usually sparse: enumerate them once.
    std::vector<std::pair<std::size_t, std::size_t>> positives;
    for (std::size_t i = 0; i < r.rows(); ++i) {
        for (std::size_t j = 0; j < r.cols(); ++j) {
            if (r(i, j) >= cfg.theta_pos) positives.emplace_back(i, j);
        }
    }
    if (positives.empty()) {
        throw TrainingError("train_itm: no pairs with relevance >= theta_pos");
    }

    Rng rng(cfg.seed);
    detail::CrossAdamState adam_state;
    adam_state.m = CrossEncoderGrads::zeros_like(params);
    adam_state.v = CrossEncoderGrads::zeros_like(params);

    const std::size_t half = cfg.batch / 2;
    std::vector<double> losses;
    losses.reserve(cfg.steps);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        CrossEncoderGrads grads = CrossEncoderGrads::zeros_like(params);
        double loss = 0.0;
        std::size_t used = 0;
        for (std::size_t b = 0; b < 2 * half; ++b) {
            const bool positive = b < half;
            std::size_t qi, vj;
            if (positive) {
                const auto& pick = positives[rng.uniform_index(positives.size())];
                qi = pick.first;
                vj = pick.second;
            } else {
                // Rejection-sample a negative; negatives dominate the matrix.
                std::size_t guard = 0;
                do {
                    qi = rng.uniform_index(r.rows());
                    vj = rng.uniform_index(r.cols());
                } while (r(qi, vj) > cfg.theta_neg && ++guard < 10000);
                if (r(qi, vj) > cfg.theta_neg) {
                    throw TrainingError("train_itm: could not sample a negative pair");
                }
            }
            CrossEncoderCache cache;
            const std::vector<double> o = cross_encode_forward(
                videos.data.row_vector(vj), texts.data.row_vector(qi), params, &cache);
            // two-class cross entropy, target class = positive ? 1 : 0
            double l0 = params.itm_bias(0, 0);
            double l1 = params.itm_bias(0, 1);
            for (std::size_t c = 0; c < o.size(); ++c) {
                l0 += params.itm_weight(0, c) * o[c];
                l1 += params.itm_weight(1, c) * o[c];
            }
            const double mx = std::max(l0, l1);
            const double e0 = std::exp(l0 - mx);
            const double e1 = std::exp(l1 - mx);
            const double z = e0 + e1;
            const double p1 = e1 / z;
            loss += positive ? -std::log(std::max(p1, 1e-300))
                             : -std::log(std::max(1.0 - p1, 1e-300));
            std::vector<double> dlogits = {e0 / z, p1};
            dlogits[positive ? 1 : 0] -= 1.0;
            cross_encode_backward(dlogits, params, cache, grads);
            ++used;
        }
        const double inv = 1.0 / static_cast<double>(used);
        loss *= inv;
        losses.push_back(loss);
        if (!std::isfinite(loss)) {
            throw TrainingError("train_itm: non-finite loss at step " + std::to_string(step));
        }
        // mean gradient over the batch
        auto scale_grads = [inv](Matrix& mtx) {
            for (double& x : mtx.data()) x *= inv;
        };
        scale_grads(grads.type_video);
        scale_grads(grads.type_text);
        scale_grads(grads.itm_weight);
        scale_grads(grads.itm_bias);
        for (auto& lg : grads.layers) {
            for (double& x : lg.ln1_gamma) x *= inv;
            for (double& x : lg.ln1_beta) x *= inv;
            for (double& x : lg.ln2_gamma) x *= inv;
            for (double& x : lg.ln2_beta) x *= inv;
            scale_grads(lg.attn.wq);
            scale_grads(lg.attn.wk);
            scale_grads(lg.attn.wv);
            scale_grads(lg.attn.wo);
            scale_grads(lg.mlp_w1);
            scale_grads(lg.mlp_w2);
        }
        detail::cross_adamw_step(params, grads, adam_state,
                                 cosine_lr(step, cfg.steps, cfg.lr), cfg.adam);
    }
    return losses;
}

namespace detail {

inline void adamw_update_vec(std::vector<double>& param, const std::vector<double>& grad,
                             std::vector<double>& m, std::vector<double>& v, std::size_t step,
                             double lr, const AdamWConfig& cfg) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * param[i]);
    }
}

inline void cross_adamw_step(CrossEncoderParams& p, const CrossEncoderGrads& g,
                             CrossAdamState& st, double lr, const AdamWConfig& cfg) {
    ++st.step;
    adamw_update(p.type_video, g.type_video, st.m.type_video, st.v.type_video, st.step, lr, cfg);
    adamw_update(p.type_text, g.type_text, st.m.type_text, st.v.type_text, st.step, lr, cfg);
    adamw_update(p.itm_weight, g.itm_weight, st.m.itm_weight, st.v.itm_weight, st.step, lr, cfg);
    adamw_update(p.itm_bias, g.itm_bias, st.m.itm_bias, st.v.itm_bias, st.step, lr, cfg);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& lp = p.layers[l];
        const auto& lg = g.layers[l];
        auto& lm = st.m.layers[l];
        auto& lv = st.v.layers[l];
        adamw_update_vec(lp.ln1_gamma, lg.ln1_gamma, lm.ln1_gamma, lv.ln1_gamma, st.step, lr, cfg);
        adamw_update_vec(lp.ln1_beta, lg.ln1_beta, lm.ln1_beta, lv.ln1_beta, st.step, lr, cfg);
        adamw_update_vec(lp.ln2_gamma, lg.ln2_gamma, lm.ln2_gamma, lv.ln2_gamma, st.step, lr, cfg);
        adamw_update_vec(lp.ln2_beta, lg.ln2_beta, lm.ln2_beta, lv.ln2_beta, st.step, lr, cfg);
        adamw_update(lp.attn.wq, lg.attn.wq, lm.attn.wq, lv.attn.wq, st.step, lr, cfg);
        adamw_update(lp.attn.wk, lg.attn.wk, lm.attn.wk, lv.attn.wk, st.step, lr, cfg);
        adamw_update(lp.attn.wv, lg.attn.wv, lm.attn.wv, lv.attn.wv, st.step, lr, cfg);
        adamw_update(lp.attn.wo, lg.attn.wo, lm.attn.wo, lv.attn.wo, st.step, lr, cfg);
        adamw_update(lp.mlp_w1, lg.mlp_w1, lm.mlp_w1, lv.mlp_w1, st.step, lr, cfg);
        adamw_update(lp.mlp_w2, lg.mlp_w2, lm.mlp_w2, lv.mlp_w2, st.step, lr, cfg);
    }
}

} // namespace detail

} // namespace tempret

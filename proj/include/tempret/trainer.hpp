// Model container and the dual-encoder training loop.
//
// Parameters live in one struct enumerated as named tensors. Three parameter
// groups exist: "base" (the two modality projections), "temporal" (positional
// encodings plus the temporal layers, stepped with a 2x learning-rate
// multiplier), and "rerank" (the cross-encoder, trained separately against
// binary cross-entropy after the retrieval space has converged).
//
// The retrieval loss path per batch: encode texts and clips, build the
// cosine similarity matrix, apply the SMS loss against the batch-aligned
// relevance slice, and push the gradient back through the cosine, the
// pooling, the layer stack, and the projections.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "tempret/config.hpp"
#include "tempret/errors.hpp"
#include "tempret/kernels.hpp"
#include "tempret/matrix.hpp"
#include "tempret/reranker.hpp"
#include "tempret/retrieval_space.hpp"
#include "tempret/rng.hpp"
#include "tempret/serialization.hpp"
#include "tempret/sms_objective.hpp"
#include "tempret/synthetic.hpp"
#include "tempret/temporal_encoder.hpp"

namespace tempret {

struct ModelDims {
    std::size_t layers = 4;
    std::size_t dim = 512;
    std::size_t heads = 8;
    std::size_t t_max = 64;
    std::size_t d_in_video = 64;
    std::size_t d_in_text = 64;
    std::size_t cross_layers = 2;
    bool temporal_enabled = true;
    GeluKind gelu_kind = GeluKind::Tanh;

    static ModelDims from_config(const RunConfig& c, bool temporal_enabled = true) {
        ModelDims d;
        d.layers = c.layers;
        d.dim = c.dim;
        d.heads = c.heads;
        d.t_max = c.t_max;
        d.d_in_video = c.d_in_video;
        d.d_in_text = c.d_in_text;
        d.cross_layers = c.cross_layers;
        d.temporal_enabled = temporal_enabled;
        d.gelu_kind = c.gelu_exact ? GeluKind::Erf : GeluKind::Tanh;
        return d;
    }
};

struct ModelParams {
    ModelDims dims;
    Matrix visual_proj;  // d_in_video x dim
    Matrix text_proj;    // d_in_text x dim
    TemporalEncoderParams temporal;
    CrossEncoderParams cross;
};

struct ModelGrads {
    Matrix visual_proj;
    Matrix text_proj;
    TemporalEncoderGrads temporal;

    static ModelGrads zeros_like(const ModelParams& p) {
        ModelGrads g;
        g.visual_proj = Matrix(p.visual_proj.rows(), p.visual_proj.cols());
        g.text_proj = Matrix(p.text_proj.rows(), p.text_proj.cols());
        g.temporal = TemporalEncoderGrads::zeros_like(p.temporal);
        return g;
    }
};

// ---------------------------------------------------------------------------
// initialization
// ---------------------------------------------------------------------------

namespace detail {

inline void xavier_uniform(Rng& rng, Matrix& m, std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : m.data()) v = rng.uniform(-a, a);
}

inline TransformerLayerParams init_layer(Rng& rng, std::size_t d, std::size_t heads,
                                         GeluKind gelu_kind) {
    (void)gelu_kind;
    TransformerLayerParams p;
    p.ln1_gamma.assign(d, 1.0);
    p.ln1_beta.assign(d, 0.0);
    p.attn.heads = heads;
    p.attn.wq = Matrix(d, d);
    p.attn.wk = Matrix(d, d);
    p.attn.wv = Matrix(d, d);
    p.attn.wo = Matrix(d, d);
    xavier_uniform(rng, p.attn.wq, d, d);
    xavier_uniform(rng, p.attn.wk, d, d);
    xavier_uniform(rng, p.attn.wv, d, d);
    xavier_uniform(rng, p.attn.wo, d, d);
    p.ln2_gamma.assign(d, 1.0);
    p.ln2_beta.assign(d, 0.0);
    p.mlp_w1 = Matrix(4 * d, d);
    p.mlp_w2 = Matrix(d, 4 * d);
    xavier_uniform(rng, p.mlp_w1, d, 4 * d);
    xavier_uniform(rng, p.mlp_w2, 4 * d, d);
    return p;
}

}  // namespace detail

/// Deterministic initialization. The full parameter set (including the
/// temporal stack and the cross-encoder) is always drawn in the same fixed
/// order, so models that differ only in which components they *use* start
/// from identical shared parameters under one seed.
inline ModelParams init_model(const ModelDims& dims, std::uint64_t seed) {
    ModelParams p;
    p.dims = dims;
    Rng rng(seed);

    p.visual_proj = Matrix(dims.d_in_video, dims.dim);
    detail::xavier_uniform(rng, p.visual_proj, dims.d_in_video, dims.dim);
    p.text_proj = Matrix(dims.d_in_text, dims.dim);
    detail::xavier_uniform(rng, p.text_proj, dims.d_in_text, dims.dim);

    p.temporal.heads = dims.heads;
    p.temporal.gelu_kind = dims.gelu_kind;
    p.temporal.pos_encoding = Matrix(dims.t_max, dims.dim);
    for (double& v : p.temporal.pos_encoding.data()) v = rng.gauss(0.0, 0.02);
    for (std::size_t l = 0; l < dims.layers; ++l) {
        p.temporal.layers.push_back(detail::init_layer(rng, dims.dim, dims.heads,
                                                       dims.gelu_kind));
    }

    p.cross.heads = dims.heads;
    p.cross.gelu_kind = dims.gelu_kind;
    p.cross.type_video = Matrix(1, dims.dim);
    p.cross.type_text = Matrix(1, dims.dim);
    for (double& v : p.cross.type_video.data()) v = rng.gauss(0.0, 0.02);
    for (double& v : p.cross.type_text.data()) v = rng.gauss(0.0, 0.02);
    for (std::size_t l = 0; l < dims.cross_layers; ++l) {
        p.cross.layers.push_back(detail::init_layer(rng, dims.dim, dims.heads,
                                                    dims.gelu_kind));
    }
    p.cross.itm_weight = Matrix(2, dims.dim);
    for (double& v : p.cross.itm_weight.data()) v = rng.gauss(0.0, 0.02);
    p.cross.itm_bias = Matrix(1, 2);
    return p;
}

// ---------------------------------------------------------------------------
// tensor enumeration (checkpointing, optimizer state)
// ---------------------------------------------------------------------------

enum class ParamGroup { Base, Temporal, Rerank };

struct TensorRef {
    std::string name;
    ParamGroup group;
    double* data;
    std::size_t rows;
    std::size_t cols;

    std::size_t size() const { return rows * cols; }
};

namespace detail {

inline void add_layer_tensors(std::vector<TensorRef>& out, const std::string& prefix,
                              ParamGroup group, TransformerLayerParams& layer) {
    const std::size_t d = layer.ln1_gamma.size();
    out.push_back({prefix + ".ln1_gamma", group, layer.ln1_gamma.data(), 1, d});
    out.push_back({prefix + ".ln1_beta", group, layer.ln1_beta.data(), 1, d});
    out.push_back({prefix + ".wq", group, layer.attn.wq.data().data(), d, d});
    out.push_back({prefix + ".wk", group, layer.attn.wk.data().data(), d, d});
    out.push_back({prefix + ".wv", group, layer.attn.wv.data().data(), d, d});
    out.push_back({prefix + ".wo", group, layer.attn.wo.data().data(), d, d});
    out.push_back({prefix + ".ln2_gamma", group, layer.ln2_gamma.data(), 1, d});
    out.push_back({prefix + ".ln2_beta", group, layer.ln2_beta.data(), 1, d});
    out.push_back({prefix + ".w1", group, layer.mlp_w1.data().data(), 4 * d, d});
    out.push_back({prefix + ".w2", group, layer.mlp_w2.data().data(), d, 4 * d});
}

inline void add_layer_grad_tensors(std::vector<TensorRef>& out, const std::string& prefix,
                                   ParamGroup group, TransformerLayerGrads& layer) {
    const std::size_t d = layer.ln1_gamma.size();
    out.push_back({prefix + ".ln1_gamma", group, layer.ln1_gamma.data(), 1, d});
    out.push_back({prefix + ".ln1_beta", group, layer.ln1_beta.data(), 1, d});
    out.push_back({prefix + ".wq", group, layer.attn.wq.data().data(), d, d});
    out.push_back({prefix + ".wk", group, layer.attn.wk.data().data(), d, d});
    out.push_back({prefix + ".wv", group, layer.attn.wv.data().data(), d, d});
    out.push_back({prefix + ".wo", group, layer.attn.wo.data().data(), d, d});
    out.push_back({prefix + ".ln2_gamma", group, layer.ln2_gamma.data(), 1, d});
    out.push_back({prefix + ".ln2_beta", group, layer.ln2_beta.data(), 1, d});
    out.push_back({prefix + ".w1", group, layer.mlp_w1.data().data(), 4 * d, d});
    out.push_back({prefix + ".w2", group, layer.mlp_w2.data().data(), d, 4 * d});
}

}  // namespace detail

/// Every learnable tensor, in a fixed order shared with grad_tensors.
inline std::vector<TensorRef> model_tensors(ModelParams& p) {
    std::vector<TensorRef> out;
    out.push_back({"visual_proj", ParamGroup::Base, p.visual_proj.data().data(),
                   p.visual_proj.rows(), p.visual_proj.cols()});
    out.push_back({"text_proj", ParamGroup::Base, p.text_proj.data().data(),
                   p.text_proj.rows(), p.text_proj.cols()});
    out.push_back({"temporal.pos", ParamGroup::Temporal,
                   p.temporal.pos_encoding.data().data(), p.temporal.pos_encoding.rows(),
                   p.temporal.pos_encoding.cols()});
    for (std::size_t l = 0; l < p.temporal.layers.size(); ++l) {
        detail::add_layer_tensors(out, "temporal.l" + std::to_string(l), ParamGroup::Temporal,
                                  p.temporal.layers[l]);
    }
    out.push_back({"cross.type_video", ParamGroup::Rerank, p.cross.type_video.data().data(),
                   1, p.cross.type_video.cols()});
    out.push_back({"cross.type_text", ParamGroup::Rerank, p.cross.type_text.data().data(),
                   1, p.cross.type_text.cols()});
    for (std::size_t l = 0; l < p.cross.layers.size(); ++l) {
        detail::add_layer_tensors(out, "cross.l" + std::to_string(l), ParamGroup::Rerank,
                                  p.cross.layers[l]);
    }
    out.push_back({"cross.itm_w", ParamGroup::Rerank, p.cross.itm_weight.data().data(),
                   p.cross.itm_weight.rows(), p.cross.itm_weight.cols()});
    out.push_back({"cross.itm_b", ParamGroup::Rerank, p.cross.itm_bias.data().data(), 1, 2});
    return out;
}

/// Gradient tensors for the SMS-trained groups, order-aligned with the
/// leading entries of model_tensors.
inline std::vector<TensorRef> grad_tensors(ModelGrads& g) {
    std::vector<TensorRef> out;
    out.push_back({"visual_proj", ParamGroup::Base, g.visual_proj.data().data(),
                   g.visual_proj.rows(), g.visual_proj.cols()});
    out.push_back({"text_proj", ParamGroup::Base, g.text_proj.data().data(),
                   g.text_proj.rows(), g.text_proj.cols()});
    out.push_back({"temporal.pos", ParamGroup::Temporal,
                   g.temporal.pos_encoding.data().data(), g.temporal.pos_encoding.rows(),
                   g.temporal.pos_encoding.cols()});
    for (std::size_t l = 0; l < g.temporal.layers.size(); ++l) {
        detail::add_layer_grad_tensors(out, "temporal.l" + std::to_string(l),
                                       ParamGroup::Temporal, g.temporal.layers[l]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// checkpointing
// ---------------------------------------------------------------------------

inline void save_checkpoint(const std::string& path, const ModelParams& params) {
    ModelParams& mutable_params = const_cast<ModelParams&>(params);
    CheckpointDims dims;
    dims.layers = static_cast<std::uint32_t>(params.dims.layers);
    dims.dim = static_cast<std::uint32_t>(params.dims.dim);
    dims.heads = static_cast<std::uint32_t>(params.dims.heads);
    dims.t_max = static_cast<std::uint32_t>(params.dims.t_max);
    dims.d_in_video = static_cast<std::uint32_t>(params.dims.d_in_video);
    dims.d_in_text = static_cast<std::uint32_t>(params.dims.d_in_text);
    dims.cross_layers = static_cast<std::uint32_t>(params.dims.cross_layers);
    dims.temporal_enabled = params.dims.temporal_enabled ? 1 : 0;
    dims.gelu_kind = params.dims.gelu_kind == GeluKind::Erf ? 1 : 0;
    std::vector<NamedTensor> tensors;
    for (const TensorRef& ref : model_tensors(mutable_params)) {
        NamedTensor t;
        t.name = ref.name;
        t.value = Matrix(ref.rows, ref.cols);
        for (std::size_t i = 0; i < ref.size(); ++i) t.value.data()[i] = ref.data[i];
        tensors.push_back(std::move(t));
    }
    save_named_tensors(path, dims, tensors);
}

inline ModelParams load_checkpoint(const std::string& path) {
    CheckpointDims file_dims;
    const std::vector<NamedTensor> tensors = load_named_tensors(path, file_dims);
    ModelDims dims;
    dims.layers = file_dims.layers;
    dims.dim = file_dims.dim;
    dims.heads = file_dims.heads;
    dims.t_max = file_dims.t_max;
    dims.d_in_video = file_dims.d_in_video;
    dims.d_in_text = file_dims.d_in_text;
    dims.cross_layers = file_dims.cross_layers;
    dims.temporal_enabled = file_dims.temporal_enabled != 0;
    dims.gelu_kind = file_dims.gelu_kind == 1 ? GeluKind::Erf : GeluKind::Tanh;
    ModelParams params = init_model(dims, 0);
    std::size_t cursor = 0;
    for (const TensorRef& ref : model_tensors(params)) {
        if (cursor >= tensors.size() || tensors[cursor].name != ref.name) {
            throw FormatError(path + ": checkpoint tensor list mismatch at '" + ref.name + "'");
        }
        const Matrix& value = tensors[cursor].value;
        if (value.rows() != ref.rows || value.cols() != ref.cols) {
            throw FormatError(path + ": tensor '" + ref.name + "' has shape " +
                              shape_string(value) + ", expected " + std::to_string(ref.rows) +
                              "x" + std::to_string(ref.cols));
        }
        for (std::size_t i = 0; i < ref.size(); ++i) ref.data[i] = value.data()[i];
        ++cursor;
    }
    if (cursor != tensors.size()) {
        throw FormatError(path + ": checkpoint holds unexpected extra tensors");
    }
    return params;
}

// ---------------------------------------------------------------------------
// encoding helpers
// ---------------------------------------------------------------------------

/// Order-insensitive baseline encoder: masked mean of the projected frames.
inline std::vector<double> encode_video_pooled(const FrameSequence& seq, const Matrix& proj) {
    seq.validate();
    return masked_mean_pool(matmul(seq.features, proj), seq.mask);
}

/// Clip embedding under the model's configuration (temporal or pooled);
/// clips longer than t_max are uniformly subsampled first.
inline std::vector<double> encode_clip(const ModelParams& params, const FrameSequence& seq) {
    const FrameSequence fitted = sample_frames(seq, params.dims.t_max);
    if (params.dims.temporal_enabled) {
        return encode_video(fitted, params.visual_proj, params.temporal);
    }
    return encode_video_pooled(fitted, params.visual_proj);
}

inline std::vector<double> encode_caption(const ModelParams& params,
                                          const std::vector<double>& text_feat) {
    return encode_text(text_feat, params.text_proj);
}

// ---------------------------------------------------------------------------
// SMS training
// ---------------------------------------------------------------------------

struct TrainResult {
    ModelParams params;
    std::vector<double> step_losses;
};

namespace detail {

struct AdamSlot {
    std::vector<double> m, v;
};

/// Cosine-similarity backward: given dS over rows=texts, cols=videos,
/// accumulate gradients onto the raw embeddings.
inline void cosine_backward(const Matrix& dS, const std::vector<std::vector<double>>& texts,
                            const std::vector<std::vector<double>>& videos,
                            const Matrix& S, std::vector<std::vector<double>>& d_texts,
                            std::vector<std::vector<double>>& d_videos) {
    const std::size_t n = texts.size();
    const std::size_t d = texts[0].size();
    std::vector<double> tnorm(n), vnorm(n);
    for (std::size_t i = 0; i < n; ++i) {
        tnorm[i] = norm2(texts[i]);
        vnorm[i] = norm2(videos[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double g = dS(i, j);
            if (g == 0.0) continue;
            const double inv = 1.0 / (tnorm[i] * vnorm[j]);
            const double sij = S(i, j);
            for (std::size_t c = 0; c < d; ++c) {
                d_texts[i][c] += g * (videos[j][c] * inv - sij * texts[i][c] / (tnorm[i] * tnorm[i]));
                d_videos[j][c] += g * (texts[i][c] * inv - sij * videos[j][c] / (vnorm[j] * vnorm[j]));
            }
        }
    }
}

}  // namespace detail

struct TrainHooks {
    // called once per optimizer step with (step index, total steps, loss)
    std::function<void(std::size_t, std::size_t, double)> on_step;
};

/// Train projections (+ temporal stack when enabled) with the SMS objective,
/// then fit the ITM reranker head on the trained embeddings. All phases are
/// driven by one seed.
inline TrainResult run_train(const RunConfig& config, const DatasetBundle& bundle,
                             bool temporal_enabled = true, bool train_reranker = true,
                             const TrainHooks& hooks = {}) {
    config.validate();
    SmsConfig loss_cfg{config.margin, config.tau, config.epsilon};
    loss_cfg.validate();

    TrainResult result;
    result.params = init_model(ModelDims::from_config(config, temporal_enabled), config.seed);
    ModelParams& params = result.params;

    const std::size_t n = bundle.clip_count();
    const std::size_t batch = std::min(config.batch, n);
    const std::size_t batches_per_epoch = n / batch;  // drop the last partial batch
    const std::size_t total_steps = batches_per_epoch * config.epochs;

    AdamWConfig adam_cfg{config.beta1, config.beta2, config.adam_eps, config.weight_decay};
    ModelGrads grads = ModelGrads::zeros_like(params);
    std::vector<TensorRef> param_refs = model_tensors(params);
    std::vector<TensorRef> grad_refs = grad_tensors(grads);
    param_refs.resize(grad_refs.size());  // SMS phase trains base + temporal only
    std::vector<detail::AdamSlot> adam_state(param_refs.size());
    for (std::size_t i = 0; i < param_refs.size(); ++i) {
        adam_state[i].m.assign(param_refs[i].size(), 0.0);
        adam_state[i].v.assign(param_refs[i].size(), 0.0);
    }

    Rng shuffle_rng(Rng(config.seed).fork().next_u64());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::size_t global_step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            const std::size_t* batch_ids = order.data() + b * batch;

            // forward: embeddings for the batch
            std::vector<std::vector<double>> text_embs(batch), video_embs(batch);
            std::vector<EncodeVideoCache> caches(batch);
            std::vector<FrameSequence> seqs(batch);
            for (std::size_t k = 0; k < batch; ++k) {
                const std::size_t idx = batch_ids[k];
                text_embs[k] = encode_caption(params, bundle.texts.row_vector(idx));
                seqs[k] = bundle.clip_sequence(idx);
                if (temporal_enabled) {
                    video_embs[k] = encode_video_forward(seqs[k], params.visual_proj,
                                                         params.temporal, &caches[k]);
                } else {
                    video_embs[k] = encode_video_pooled(seqs[k], params.visual_proj);
                }
            }

            // similarity and batch-aligned relevance slice
            Matrix s(batch, batch);
            std::vector<double> tnorm(batch), vnorm(batch);
            for (std::size_t k = 0; k < batch; ++k) {
                tnorm[k] = norm2(text_embs[k]);
                vnorm[k] = norm2(video_embs[k]);
                if (tnorm[k] == 0.0 || vnorm[k] == 0.0) {
                    throw TrainingError("run_train: zero-norm embedding in batch");
                }
            }
            for (std::size_t i = 0; i < batch; ++i) {
                for (std::size_t j = 0; j < batch; ++j) {
                    s(i, j) = dot(text_embs[i], video_embs[j]) / (tnorm[i] * vnorm[j]);
                }
            }
            Matrix r_slice(batch, batch);
            for (std::size_t i = 0; i < batch; ++i) {
                for (std::size_t j = 0; j < batch; ++j) {
                    r_slice(i, j) = bundle.relevance(batch_ids[i], batch_ids[j]);
                }
            }

            const double loss = sms_loss(s, r_slice, loss_cfg);
            if (!std::isfinite(loss)) {
                throw TrainingError("run_train: non-finite loss at step " +
                                    std::to_string(global_step) + " (epoch " +
                                    std::to_string(epoch) + ")");
            }
            result.step_losses.push_back(loss);
            if (hooks.on_step) hooks.on_step(global_step, total_steps, loss);

            // backward
            const Matrix dS = sms_loss_grad(s, r_slice, loss_cfg);
            std::vector<std::vector<double>> d_texts(batch, std::vector<double>(config.dim, 0.0));
            std::vector<std::vector<double>> d_videos(batch, std::vector<double>(config.dim, 0.0));
            detail::cosine_backward(dS, text_embs, video_embs, s, d_texts, d_videos);

            // zero grads
            for (TensorRef& ref : grad_refs) {
                for (std::size_t i = 0; i < ref.size(); ++i) ref.data[i] = 0.0;
            }
            for (std::size_t k = 0; k < batch; ++k) {
                const std::size_t idx = batch_ids[k];
                // text projection: s = f * W  =>  dW += f^T (outer) ds
                const std::vector<double> feat = bundle.texts.row_vector(idx);
                for (std::size_t a = 0; a < feat.size(); ++a) {
                    if (feat[a] == 0.0) continue;
                    for (std::size_t c = 0; c < config.dim; ++c) {
                        grads.text_proj(a, c) += feat[a] * d_texts[k][c];
                    }
                }
                if (temporal_enabled) {
                    encode_video_backward(d_videos[k], params.visual_proj, params.temporal,
                                          caches[k], grads.visual_proj, grads.temporal);
                } else {
                    // pooled path: d_proj += F^T * (mask-weighted broadcast)
                    const std::size_t valid = count_valid(seqs[k].mask);
                    const double inv = 1.0 / static_cast<double>(valid);
                    Matrix d_rows(seqs[k].features.rows(), config.dim);
                    for (std::size_t f = 0; f < seqs[k].features.rows(); ++f) {
                        if (!seqs[k].mask[f]) continue;
                        for (std::size_t c = 0; c < config.dim; ++c) {
                            d_rows(f, c) = d_videos[k][c] * inv;
                        }
                    }
                    add_in_place(grads.visual_proj, matmul_at(seqs[k].features, d_rows));
                }
            }

            // optimizer step with per-group learning rates
            ++global_step;
            const double lr_now = cosine_lr(global_step - 1, total_steps, config.lr);
            for (std::size_t i = 0; i < grad_refs.size(); ++i) {
                const double mult =
                    param_refs[i].group == ParamGroup::Temporal ? config.temporal_lr_mult : 1.0;
                const double bc1 = 1.0 - std::pow(adam_cfg.beta1,
                                                  static_cast<double>(global_step));
                const double bc2 = 1.0 - std::pow(adam_cfg.beta2,
                                                  static_cast<double>(global_step));
                double* p = param_refs[i].data;
                const double* g = grad_refs[i].data;
                auto& slot = adam_state[i];
                const double lr_eff = lr_now * mult;
                for (std::size_t x = 0; x < param_refs[i].size(); ++x) {
                    slot.m[x] = adam_cfg.beta1 * slot.m[x] + (1.0 - adam_cfg.beta1) * g[x];
                    slot.v[x] = adam_cfg.beta2 * slot.v[x] + (1.0 - adam_cfg.beta2) * g[x] * g[x];
                    const double mhat = slot.m[x] / bc1;
                    const double vhat = slot.v[x] / bc2;
                    p[x] -= lr_eff * (mhat / (std::sqrt(vhat) + adam_cfg.eps) +
                                      adam_cfg.weight_decay * p[x]);
                }
            }
        }
    }

    // reranker phase: fit the ITM head on the trained, frozen embeddings
    if (train_reranker && config.itm_steps > 0) {
        EmbeddingMatrix videos, texts;
        videos.data = Matrix(n, config.dim);
        texts.data = Matrix(bundle.caption_count(), config.dim);
        for (std::size_t i = 0; i < n; ++i) {
            videos.data.set_row(i, encode_clip(params, bundle.clip_sequence(i)));
            videos.ids.push_back(bundle.clip_ids[i]);
        }
        for (std::size_t i = 0; i < bundle.caption_count(); ++i) {
            texts.data.set_row(i, encode_caption(params, bundle.texts.row_vector(i)));
            texts.ids.push_back(bundle.caption_ids[i]);
        }
        ItmTrainConfig itm_cfg;
        itm_cfg.theta_pos = config.theta_pos;
        itm_cfg.theta_neg = config.theta_neg;
        itm_cfg.steps = config.itm_steps;
        itm_cfg.batch = config.itm_batch;
        itm_cfg.lr = config.itm_lr;
        itm_cfg.seed = Rng(config.seed).fork().fork().next_u64();
        itm_cfg.adam = AdamWConfig{config.beta1, config.beta2, config.adam_eps, 0.0};
        train_itm(params.cross, videos, texts, bundle.relevance, itm_cfg);
    }
    return result;
}

} // namespace tempret

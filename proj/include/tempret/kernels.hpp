// Neural kernels: layer norm, softmax, GELU, masked multi-head self-attention.
//
// Each kernel comes in two flavors: the plain public operation, and a
// cache-carrying forward paired with an explicit backward. There is no
// autograd graph; backward passes are hand-derived and checked against
// finite differences in the test suite.
//
// Conventions:
//  - masks mark valid positions with 1; masked keys receive an additive
//    -1e9 surrogate before the attention softmax, which underflows to an
//    exact zero weight after max-subtraction,
//  - attention logits are scaled by 1/sqrt(D/heads),
//  - all reductions are fixed-order for determinism.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tempret/errors.hpp"
#include "tempret/matrix.hpp"

namespace tempret {

using Mask = std::vector<std::uint8_t>;

inline std::size_t count_valid(const Mask& mask) {
    std::size_t n = 0;
    for (auto m : mask) {
        if (m) ++n;
    }
    return n;
}

// ---------------------------------------------------------------------------
// layer norm
// ---------------------------------------------------------------------------

inline std::vector<double> layer_norm(const std::vector<double>& x,
                                      const std::vector<double>& gamma,
                                      const std::vector<double>& beta,
                                      double eps = 1e-5) {
    if (x.size() != gamma.size() || x.size() != beta.size()) {
        throw DimensionError("layer_norm: x, gamma, beta must have equal length");
    }
    if (x.empty()) throw DimensionError("layer_norm: empty input");
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = (x[i] - mean) * inv_std * gamma[i] + beta[i];
    }
    return y;
}

struct LayerNormCache {
    Matrix normalized;            // x_hat, per row
    std::vector<double> inv_std;  // one per row
};

/// Row-wise layer norm over a T x D matrix.
inline Matrix layer_norm_rows(const Matrix& x, const std::vector<double>& gamma,
                              const std::vector<double>& beta, double eps,
                              LayerNormCache* cache = nullptr) {
    if (gamma.size() != x.cols() || beta.size() != x.cols()) {
        throw DimensionError("layer_norm_rows: parameter length mismatch");
    }
    Matrix y(x.rows(), x.cols());
    if (cache) {
        cache->normalized = Matrix(x.rows(), x.cols());
        cache->inv_std.assign(x.rows(), 0.0);
    }
    const std::size_t d = x.cols();
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double* xr = x.row(r);
        double mean = 0.0;
        for (std::size_t c = 0; c < d; ++c) mean += xr[c];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
        var /= static_cast<double>(d);
        const double inv_std = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < d; ++c) {
            const double xhat = (xr[c] - mean) * inv_std;
            y(r, c) = xhat * gamma[c] + beta[c];
            if (cache) cache->normalized(r, c) = xhat;
        }
        if (cache) cache->inv_std[r] = inv_std;
    }
    return y;
}

/// Backward for layer_norm_rows. Accumulates into d_gamma/d_beta, returns dx.
inline Matrix layer_norm_rows_backward(const Matrix& dy, const std::vector<double>& gamma,
                                       const LayerNormCache& cache,
                                       std::vector<double>& d_gamma,
                                       std::vector<double>& d_beta) {
    const std::size_t d = dy.cols();
    Matrix dx(dy.rows(), dy.cols());
    for (std::size_t r = 0; r < dy.rows(); ++r) {
        const double* g = dy.row(r);
        const double* xhat = cache.normalized.row(r);
        double mean_dxhat = 0.0;
        double mean_dxhat_xhat = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double dxhat = g[c] * gamma[c];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xhat[c];
            d_gamma[c] += g[c] * xhat[c];
            d_beta[c] += g[c];
        }
        mean_dxhat /= static_cast<double>(d);
        mean_dxhat_xhat /= static_cast<double>(d);
        const double inv_std = cache.inv_std[r];
        for (std::size_t c = 0; c < d; ++c) {
            const double dxhat = g[c] * gamma[c];
            dx(r, c) = inv_std * (dxhat - mean_dxhat - xhat[c] * mean_dxhat_xhat);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

/// Numerically stabilized softmax (max subtraction).
inline std::vector<double> softmax(const std::vector<double>& x) {
    if (x.empty()) throw DimensionError("softmax: empty input");
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    std::vector<double> y(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = std::exp(x[i] - mx);
        sum += y[i];
    }
    for (double& v : y) v /= sum;
    return y;
}

/// dx for y = softmax(x) given dy, using the cached output y.
inline std::vector<double> softmax_backward(const std::vector<double>& y,
                                            const std::vector<double>& dy) {
    double inner = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) inner += y[i] * dy[i];
    std::vector<double> dx(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (dy[i] - inner);
    return dx;
}

// ---------------------------------------------------------------------------
// GELU
// ---------------------------------------------------------------------------

enum class GeluKind {
    Tanh,  // 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))) -- the default
    Erf,   // exact 0.5 x (1 + erf(x / sqrt 2))
};

namespace detail {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace detail

inline double gelu(double x, GeluKind kind = GeluKind::Tanh) {
    if (kind == GeluKind::Erf) {
        return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865476));
    }
    const double u = detail::kGeluC * (x + detail::kGeluA * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

inline double gelu_grad(double x, GeluKind kind = GeluKind::Tanh) {
    if (kind == GeluKind::Erf) {
        const double phi = std::exp(-0.5 * x * x) * 0.3989422804014327;  // pdf
        return 0.5 * (1.0 + std::erf(x * 0.7071067811865476)) + x * phi;
    }
    const double u = detail::kGeluC * (x + detail::kGeluA * x * x * x);
    const double t = std::tanh(u);
    const double du = detail::kGeluC * (1.0 + 3.0 * detail::kGeluA * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

// ---------------------------------------------------------------------------
// multi-head self-attention
// ---------------------------------------------------------------------------

/// Projection weights of one attention block. Row block h*dh..(h+1)*dh of each
/// projection holds head h, so a single D x D matrix carries the per-head
/// weights.
struct AttentionParams {
    Matrix wq;  // D x D, applied as Q = X * Wq^T
    Matrix wk;
    Matrix wv;
    Matrix wo;  // output projection, D x D
    std::size_t heads = 1;

    std::size_t dim() const { return wq.rows(); }

    void validate() const {
        const std::size_t d = wq.rows();
        if (heads == 0 || d == 0 || d % heads != 0) {
            throw DimensionError("AttentionParams: dim must be divisible by heads");
        }
        for (const Matrix* w : {&wq, &wk, &wv, &wo}) {
            if (w->rows() != d || w->cols() != d) {
                throw DimensionError("AttentionParams: weight shape mismatch");
            }
        }
    }
};

struct AttentionGrads {
    Matrix wq, wk, wv, wo;

    static AttentionGrads zeros_like(const AttentionParams& p) {
        AttentionGrads g;
        g.wq = Matrix(p.wq.rows(), p.wq.cols());
        g.wk = Matrix(p.wk.rows(), p.wk.cols());
        g.wv = Matrix(p.wv.rows(), p.wv.cols());
        g.wo = Matrix(p.wo.rows(), p.wo.cols());
        return g;
    }
};

struct AttentionCache {
    Matrix input;               // X (already normalized by the caller)
    Matrix q, k, v;             // T x D, heads packed along columns
    std::vector<Matrix> probs;  // per head, T x T attention weights
    Matrix context;             // concatenated head outputs, T x D
};

namespace detail {
constexpr double kMaskNegInf = -1e9;
}

/// Forward attention. Masked positions contribute zero as keys; query rows at
/// masked positions are still computed (they attend over the valid keys) so
/// every output row is finite.
inline Matrix attention_forward(const Matrix& x, const AttentionParams& params,
                                const Mask& mask, AttentionCache* cache = nullptr) {
    params.validate();
    const std::size_t t = x.rows();
    const std::size_t d = params.dim();
    if (x.cols() != d) {
        throw DimensionError("attention: input cols " + std::to_string(x.cols()) +
                             " != model dim " + std::to_string(d));
    }
    if (mask.size() != t) {
        throw DimensionError("attention: mask length != sequence length");
    }
    if (count_valid(mask) == 0) {
        throw DegenerateMaskError("attention: all positions masked");
    }

    const std::size_t heads = params.heads;
    const std::size_t dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix q = matmul_bt(x, params.wq);
    Matrix k = matmul_bt(x, params.wk);
    Matrix v = matmul_bt(x, params.wv);

    Matrix context(t, d);
    std::vector<Matrix> probs(heads, Matrix(t, t));
    std::vector<double> logits(t);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < t; ++i) {
            for (std::size_t j = 0; j < t; ++j) {
                double acc = 0.0;
                for (std::size_t c = 0; c < dh; ++c) acc += q(i, off + c) * k(j, off + c);
                logits[j] = acc * inv_sqrt_dh + (mask[j] ? 0.0 : detail::kMaskNegInf);
            }
            std::vector<double> p = softmax(logits);
            for (std::size_t j = 0; j < t; ++j) {
                probs[h](i, j) = p[j];
                if (p[j] != 0.0) {
                    for (std::size_t c = 0; c < dh; ++c) {
                        context(i, off + c) += p[j] * v(j, off + c);
                    }
                }
            }
        }
    }

    Matrix out = matmul_bt(context, params.wo);
    if (cache) {
        cache->input = x;
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->probs = std::move(probs);
        cache->context = context;
    }
    return out;
}

/// Public op: masked multi-head self-attention (Matrix in, Matrix out).
inline Matrix multi_head_attention(const Matrix& x, const AttentionParams& params,
                                   const Mask& mask) {
    return attention_forward(x, params, mask);
}

/// Backward attention. Returns dX and accumulates parameter grads.
inline Matrix attention_backward(const Matrix& d_out, const AttentionParams& params,
                                 const AttentionCache& cache, AttentionGrads& grads) {
    const std::size_t t = cache.input.rows();
    const std::size_t d = params.dim();
    const std::size_t heads = params.heads;
    const std::size_t dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    // out = context * Wo^T
    add_in_place(grads.wo, matmul_at(d_out, cache.context));
    Matrix d_context = matmul(d_out, params.wo);

    Matrix dq(t, d), dk(t, d), dv(t, d);
    std::vector<double> dp(t), ds(t);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        const Matrix& p = cache.probs[h];
        for (std::size_t i = 0; i < t; ++i) {
            // dV and d(probs)
            for (std::size_t j = 0; j < t; ++j) {
                double acc = 0.0;
                for (std::size_t c = 0; c < dh; ++c) {
                    acc += d_context(i, off + c) * cache.v(j, off + c);
                }
                dp[j] = acc;
                const double pij = p(i, j);
                if (pij != 0.0) {
                    for (std::size_t c = 0; c < dh; ++c) {
                        dv(j, off + c) += pij * d_context(i, off + c);
                    }
                }
            }
            // softmax backward over the key axis; masked keys have p == 0 and
            // therefore receive exactly zero logit gradient.
            double inner = 0.0;
            for (std::size_t j = 0; j < t; ++j) inner += p(i, j) * dp[j];
            for (std::size_t j = 0; j < t; ++j) ds[j] = p(i, j) * (dp[j] - inner);
            for (std::size_t j = 0; j < t; ++j) {
                const double dsj = ds[j] * inv_sqrt_dh;
                if (dsj == 0.0) continue;
                for (std::size_t c = 0; c < dh; ++c) {
                    dq(i, off + c) += dsj * cache.k(j, off + c);
                    dk(j, off + c) += dsj * cache.q(i, off + c);
                }
            }
        }
    }

    // Q = X * Wq^T  =>  dWq += dQ^T * X, dX += dQ * Wq
    add_in_place(grads.wq, matmul_at(dq, cache.input));
    add_in_place(grads.wk, matmul_at(dk, cache.input));
    add_in_place(grads.wv, matmul_at(dv, cache.input));

    Matrix dx = matmul(dq, params.wq);
    add_in_place(dx, matmul(dk, params.wk));
    add_in_place(dx, matmul(dv, params.wv));
    return dx;
}

} // namespace tempret

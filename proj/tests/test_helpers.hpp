// Shared builders for the unit and acceptance suites.

#pragma once

#include <cstdint>
#include <vector>

#include "tempret/kernels.hpp"
#include "tempret/matrix.hpp"
#include "tempret/rng.hpp"
#include "tempret/temporal_encoder.hpp"

namespace tempret::testing {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.gauss(0.0, scale);
    return m;
}

inline Matrix identity_matrix(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

inline AttentionParams random_attention(Rng& rng, std::size_t d, std::size_t heads,
                                        double scale = 0.3) {
    AttentionParams p;
    p.wq = random_matrix(rng, d, d, scale);
    p.wk = random_matrix(rng, d, d, scale);
    p.wv = random_matrix(rng, d, d, scale);
    p.wo = random_matrix(rng, d, d, scale);
    p.heads = heads;
    return p;
}

inline TransformerLayerParams random_layer(Rng& rng, std::size_t d, std::size_t heads,
                                           double scale = 0.3) {
    TransformerLayerParams p;
    p.ln1_gamma.assign(d, 1.0);
    p.ln1_beta.assign(d, 0.0);
    for (double& v : p.ln1_gamma) v += rng.gauss(0.0, 0.05);
    for (double& v : p.ln1_beta) v += rng.gauss(0.0, 0.05);
    p.attn = random_attention(rng, d, heads, scale);
    p.ln2_gamma.assign(d, 1.0);
    p.ln2_beta.assign(d, 0.0);
    for (double& v : p.ln2_gamma) v += rng.gauss(0.0, 0.05);
    for (double& v : p.ln2_beta) v += rng.gauss(0.0, 0.05);
    p.mlp_w1 = random_matrix(rng, 4 * d, d, scale);
    p.mlp_w2 = random_matrix(rng, d, 4 * d, scale);
    return p;
}

inline TemporalEncoderParams random_encoder(Rng& rng, std::size_t d, std::size_t heads,
                                            std::size_t layers, std::size_t t_max,
                                            double pos_scale = 0.3) {
    TemporalEncoderParams p;
    p.pos_encoding = random_matrix(rng, t_max, d, pos_scale);
    for (std::size_t l = 0; l < layers; ++l) p.layers.push_back(random_layer(rng, d, heads));
    p.heads = heads;
    return p;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::fabs(a[i] - b[i]));
    }
    return worst;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    return max_abs_diff(a.data(), b.data());
}

inline double cosine_of(const std::vector<double>& a, const std::vector<double>& b) {
    return dot(a, b) / (norm2(a) * norm2(b));
}

} // namespace tempret::testing

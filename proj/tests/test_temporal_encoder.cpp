#include <catch2/catch.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "tempret/temporal_encoder.hpp"
#include "tempret/rng.hpp"
#include "test_helpers.hpp"

using namespace tempret;
using namespace tempret::testing;

namespace {

// Flat view over every learnable scalar of (projection, encoder params),
// used by the finite-difference check.
struct ParamView {
    std::vector<double*> scalars;

    void add(std::vector<double>& v) {
        for (double& x : v) scalars.push_back(&x);
    }
    void add(Matrix& m) {
        for (double& x : m.data()) scalars.push_back(&x);
    }
};

ParamView view_of(Matrix& proj, TemporalEncoderParams& params) {
    ParamView view;
    view.add(proj);
    view.add(params.pos_encoding);
    for (auto& layer : params.layers) {
        view.add(layer.ln1_gamma);
        view.add(layer.ln1_beta);
        view.add(layer.attn.wq);
        view.add(layer.attn.wk);
        view.add(layer.attn.wv);
        view.add(layer.attn.wo);
        view.add(layer.ln2_gamma);
        view.add(layer.ln2_beta);
        view.add(layer.mlp_w1);
        view.add(layer.mlp_w2);
    }
    return view;
}

std::vector<double> collect_grads(const Matrix& d_proj, const TemporalEncoderGrads& grads,
                                  std::size_t t_used) {
    std::vector<double> flat;
    auto push_matrix = [&flat](const Matrix& m) {
        for (double v : m.data()) flat.push_back(v);
    };
    auto push_vec = [&flat](const std::vector<double>& v) {
        for (double x : v) flat.push_back(x);
    };
    (void)t_used;
    push_matrix(d_proj);
    push_matrix(grads.pos_encoding);
    for (const auto& layer : grads.layers) {
        push_vec(layer.ln1_gamma);
        push_vec(layer.ln1_beta);
        push_matrix(layer.attn.wq);
        push_matrix(layer.attn.wk);
        push_matrix(layer.attn.wv);
        push_matrix(layer.attn.wo);
        push_vec(layer.ln2_gamma);
        push_vec(layer.ln2_beta);
        push_matrix(layer.mlp_w1);
        push_matrix(layer.mlp_w2);
    }
    return flat;
}

}  // namespace


TEST_CASE("add_positional_encoding basic behavior", "[temporal]") {
    Matrix x = Matrix::of({{1, 1}});
    Matrix p = Matrix::of({{2, 3}, {9, 9}});
    Matrix out = add_positional_encoding(x, p);
    CHECK(out(0, 0) == 3.0);
    CHECK(out(0, 1) == 4.0);

    Matrix zeros(1, 2);
    CHECK(max_abs_diff(add_positional_encoding(x, Matrix(2, 2)), x) == 0.0);
    CHECK(max_abs_diff(add_positional_encoding(Matrix(2, 2), p), p) == 0.0);

    CHECK_THROWS_AS(add_positional_encoding(Matrix(3, 2), p), CapacityError);
    CHECK_THROWS_AS(add_positional_encoding(Matrix(1, 3), p), DimensionError);
}

TEST_CASE("transformer layer with zero output weights is the identity", "[temporal]") {
    Rng rng(41);
    TransformerLayerParams p = random_layer(rng, 8, 2);
    p.attn.wo = Matrix(8, 8);
    p.mlp_w2 = Matrix(8, 32);
    Matrix h = random_matrix(rng, 3, 8);
    Matrix out = transformer_layer(h, p, {1, 1, 1});
    CHECK(max_abs_diff(out, h) == 0.0);
}

TEST_CASE("single-frame layer matches hand-composed sub-blocks", "[temporal]") {
    Rng rng(43);
    const std::size_t d = 6;
    TransformerLayerParams p = random_layer(rng, d, 3);
    Matrix h = random_matrix(rng, 1, d);
    Matrix out = transformer_layer(h, p, {1});

    // With one frame the attention weights collapse to 1, so the attention
    // sub-block is LN -> V projection -> output projection.
    std::vector<double> normed = layer_norm(h.row_vector(0), p.ln1_gamma, p.ln1_beta,
                                            kLayerNormEps);
    std::vector<double> v = vecmat(normed, transpose(p.attn.wv));
    std::vector<double> attn_out = vecmat(v, transpose(p.attn.wo));
    std::vector<double> h_mid(d);
    for (std::size_t c = 0; c < d; ++c) h_mid[c] = h(0, c) + attn_out[c];

    std::vector<double> normed2 = layer_norm(h_mid, p.ln2_gamma, p.ln2_beta, kLayerNormEps);
    std::vector<double> pre = vecmat(normed2, transpose(p.mlp_w1));
    for (double& u : pre) u = gelu(u);
    std::vector<double> mlp_out = vecmat(pre, transpose(p.mlp_w2));
    for (std::size_t c = 0; c < d; ++c) {
        CHECK(out(0, c) == Approx(h_mid[c] + mlp_out[c]).epsilon(1e-10));
    }
}

TEST_CASE("transformer layer is permutation equivariant", "[temporal]") {
    Rng rng(47);
    TransformerLayerParams p = random_layer(rng, 8, 4);
    Matrix h = random_matrix(rng, 5, 8);
    const Mask mask = {1, 1, 1, 1, 1};
    std::vector<std::size_t> perm = {0, 1, 2, 3, 4};
    rng.shuffle(perm);
    Matrix hp(5, 8);
    for (std::size_t r = 0; r < 5; ++r) hp.set_row(r, h.row_vector(perm[r]));
    Matrix out = transformer_layer(h, p, mask);
    Matrix outp = transformer_layer(hp, p, mask);
    for (std::size_t r = 0; r < 5; ++r) {
        CHECK(max_abs_diff(outp.row_vector(r), out.row_vector(perm[r])) < 1e-6);
    }
}

TEST_CASE("masked_mean_pool examples", "[temporal]") {
    Matrix x = Matrix::of({{1, 2}, {3, 4}});
    auto out = masked_mean_pool(x, {1, 1});
    CHECK(out[0] == Approx(2.0));
    CHECK(out[1] == Approx(3.0));

    Matrix padded = Matrix::of({{1, 2}, {9, 9}});
    out = masked_mean_pool(padded, {1, 0});
    CHECK(out[0] == Approx(1.0));
    CHECK(out[1] == Approx(2.0));

    Matrix same = Matrix::of({{4, -1}, {4, -1}, {4, -1}});
    out = masked_mean_pool(same, {1, 0, 1});
    CHECK(out[0] == Approx(4.0));
    CHECK(out[1] == Approx(-1.0));

    CHECK_THROWS_AS(masked_mean_pool(x, {0, 0}), DegenerateMaskError);
    CHECK_THROWS_AS(masked_mean_pool(x, {1}), DimensionError);
}

TEST_CASE("identity layers double the pooled projection via the global residual", "[temporal]") {
    Rng rng(53);
    const std::size_t d_in = 5, d = 8, t = 4;
    TemporalEncoderParams params = random_encoder(rng, d, 2, 2, 16);
    params.pos_encoding = Matrix(16, d);  // P = 0
    for (auto& layer : params.layers) {
        layer.attn.wo = Matrix(d, d);
        layer.mlp_w2 = Matrix(d, 4 * d);
    }
    Matrix proj = random_matrix(rng, d_in, d);
    FrameSequence seq;
    seq.features = random_matrix(rng, t, d_in);
    seq.mask = {1, 1, 0, 1};

    std::vector<double> emb = encode_video(seq, proj, params);
    std::vector<double> pooled = masked_mean_pool(matmul(seq.features, proj), seq.mask);
    REQUIRE(emb.size() == d);
    for (std::size_t c = 0; c < d; ++c) {
        CHECK(emb[c] == 2.0 * pooled[c]);  // exact: doubling is a power of two
    }
}

TEST_CASE("zero positional encodings make encode_video order invariant", "[temporal]") {
    Rng rng(59);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t t = 3 + rng.uniform_index(3);
        const std::size_t d = 8;
        TemporalEncoderParams params = random_encoder(rng, d, 2, 2, 16);
        params.pos_encoding = Matrix(16, d);
        Matrix proj = random_matrix(rng, 6, d);
        FrameSequence seq;
        seq.features = random_matrix(rng, t, 6);
        seq.mask.assign(t, 1);

        std::vector<std::size_t> perm(t);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);
        FrameSequence shuffled;
        shuffled.features = Matrix(t, 6);
        shuffled.mask.assign(t, 1);
        for (std::size_t r = 0; r < t; ++r) {
            shuffled.features.set_row(r, seq.features.row_vector(perm[r]));
        }
        CHECK(max_abs_diff(encode_video(seq, proj, params),
                           encode_video(shuffled, proj, params)) < 1e-6);
    }
}

TEST_CASE("nonzero positional encodings break order invariance", "[temporal]") {
    Rng rng(61);
    TemporalEncoderParams params = random_encoder(rng, 8, 2, 2, 16, 0.5);
    Matrix proj = random_matrix(rng, 6, 8);
    FrameSequence seq;
    seq.features = random_matrix(rng, 4, 6);
    seq.mask = {1, 1, 1, 1};
    FrameSequence reversed;
    reversed.features = Matrix(4, 6);
    reversed.mask = {1, 1, 1, 1};
    for (std::size_t r = 0; r < 4; ++r) {
        reversed.features.set_row(r, seq.features.row_vector(3 - r));
    }
    CHECK(max_abs_diff(encode_video(seq, proj, params),
                       encode_video(reversed, proj, params)) > 1e-4);
}

TEST_CASE("encode_video output length is D for any frame count", "[temporal]") {
    Rng rng(67);
    TemporalEncoderParams params = random_encoder(rng, 8, 2, 1, 16);
    Matrix proj = random_matrix(rng, 4, 8);
    for (std::size_t t : {1u, 3u, 9u, 16u}) {
        FrameSequence seq;
        seq.features = random_matrix(rng, t, 4);
        seq.mask.assign(t, 1);
        CHECK(encode_video(seq, proj, params).size() == 8);
    }
}

TEST_CASE("encoder gradients match central finite differences", "[temporal]") {
    Rng rng(71);
    for (int rep = 0; rep < 3; ++rep) {
        const std::size_t t = 2 + rng.uniform_index(4);       // <= 6 frames
        const std::size_t d = 2 * (1 + rng.uniform_index(4)); // <= 16, even
        const std::size_t layers = 1 + rng.uniform_index(2);
        const std::size_t d_in = 3;
        TemporalEncoderParams params = random_encoder(rng, d, 2, layers, t + 2, 0.3);
        Matrix proj = random_matrix(rng, d_in, d, 0.5);
        FrameSequence seq;
        seq.features = random_matrix(rng, t, d_in);
        seq.mask.assign(t, 1);
        if (t > 2) seq.mask[t - 1] = 0;  // exercise the masked path

        std::vector<double> probe(d);
        for (auto& v : probe) v = rng.gauss();

        EncodeVideoCache cache;
        std::vector<double> emb = encode_video_forward(seq, proj, params, &cache);
        (void)emb;
        Matrix d_proj(d_in, d);
        TemporalEncoderGrads grads = TemporalEncoderGrads::zeros_like(params);
        encode_video_backward(probe, proj, params, cache, d_proj, grads);
        const std::vector<double> analytic = collect_grads(d_proj, grads, t);

        ParamView view = view_of(proj, params);
        REQUIRE(view.scalars.size() == analytic.size());

        const double h = 1e-5;
        double worst = 0.0;
        // probe a deterministic spread of parameters rather than all of them
        const std::size_t stride = std::max<std::size_t>(1, view.scalars.size() / 160);
        for (std::size_t i = 0; i < view.scalars.size(); i += stride) {
            double* slot = view.scalars[i];
            const double keep = *slot;
            *slot = keep + h;
            const double up = dot(encode_video(seq, proj, params), probe);
            *slot = keep - h;
            const double down = dot(encode_video(seq, proj, params), probe);
            *slot = keep;
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-3});
            worst = std::max(worst, std::fabs(fd - analytic[i]) / denom);
        }
        CHECK(worst < 1e-3);
    }
}

TEST_CASE("sample_frames keeps short clips and downsamples long ones", "[temporal]") {
    Rng rng(73);
    FrameSequence seq;
    seq.features = random_matrix(rng, 5, 3);
    seq.mask.assign(5, 1);
    FrameSequence same = sample_frames(seq, 8);
    CHECK(same.features.rows() == 5);

    FrameSequence longseq;
    longseq.features = Matrix(12, 2);
    for (std::size_t t = 0; t < 12; ++t) {
        longseq.features(t, 0) = static_cast<double>(t);
    }
    longseq.mask.assign(12, 1);
    FrameSequence sampled = sample_frames(longseq, 4);
    REQUIRE(sampled.features.rows() == 4);
    // uniform midpoints of 12/4 spans: frames 1, 4, 7, 10
    CHECK(sampled.features(0, 0) == Approx(1.0));
    CHECK(sampled.features(1, 0) == Approx(4.0));
    CHECK(sampled.features(2, 0) == Approx(7.0));
    CHECK(sampled.features(3, 0) == Approx(10.0));

    // when every sampled midpoint lands on padding, the first valid frame
    // is kept so the result still has a usable mask
    FrameSequence sparse = longseq;
    sparse.mask.assign(12, 0);
    sparse.mask[0] = 1;
    FrameSequence rescued = sample_frames(sparse, 4);
    CHECK(count_valid(rescued.mask) == 1);
    CHECK(rescued.mask[0] == 1);
    CHECK(rescued.features(0, 0) == Approx(0.0).margin(1e-12));
}


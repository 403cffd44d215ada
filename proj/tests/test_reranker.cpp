#include <catch2/catch.hpp>

#include <cmath>

#include "tempret/reranker.hpp"
#include "tempret/rng.hpp"
#include "test_helpers.hpp"

using namespace tempret;
using namespace tempret::testing;

namespace {

CrossEncoderParams random_cross(Rng& rng, std::size_t d, std::size_t heads,
                                std::size_t layers = 2) {
    CrossEncoderParams p;
    p.type_video = random_matrix(rng, 1, d, 0.3);
    p.type_text = random_matrix(rng, 1, d, 0.3);
    for (std::size_t l = 0; l < layers; ++l) p.layers.push_back(random_layer(rng, d, heads));
    p.itm_weight = random_matrix(rng, 2, d, 0.2);
    p.itm_bias = Matrix(1, 2);
    p.heads = heads;
    return p;
}

EmbeddingMatrix make_embeddings(const Matrix& data, const std::string& prefix) {
    EmbeddingMatrix e;
    e.data = data;
    for (std::size_t i = 0; i < data.rows(); ++i) e.ids.push_back(prefix + std::to_string(i));
    return e;
}

}  // namespace


TEST_CASE("zero layer output weights reduce cross_encode to the residual path", "[reranker]") {
    Rng rng(107);
    const std::size_t d = 6;
    CrossEncoderParams p = random_cross(rng, d, 2);
    for (auto& layer : p.layers) {
        layer.attn.wo = Matrix(d, d);
        layer.mlp_w2 = Matrix(d, 4 * d);
    }
    std::vector<double> v(d), q(d);
    for (auto& x : v) x = rng.gauss();
    for (auto& x : q) x = rng.gauss();
    std::vector<double> o = cross_encode(v, q, p);
    for (std::size_t c = 0; c < d; ++c) {
        CHECK(o[c] == Approx(v[c] + p.type_video(0, c)).epsilon(1e-12));
    }
}

TEST_CASE("cross_encode is role-asymmetric and deterministic", "[reranker]") {
    Rng rng(109);
    const std::size_t d = 8;
    CrossEncoderParams p = random_cross(rng, d, 2);
    std::vector<double> v(d), q(d);
    for (auto& x : v) x = rng.gauss();
    for (auto& x : q) x = rng.gauss();
    std::vector<double> o1 = cross_encode(v, q, p);
    std::vector<double> o2 = cross_encode(v, q, p);
    CHECK(max_abs_diff(o1, o2) == 0.0);
    std::vector<double> swapped = cross_encode(q, v, p);
    CHECK(max_abs_diff(o1, swapped) > 1e-6);
    CHECK_THROWS_AS(cross_encode({1.0}, q, p), DimensionError);
}

TEST_CASE("itm_score hand values and stability", "[reranker]") {
    CrossEncoderParams p;
    p.itm_weight = Matrix(2, 2);
    p.itm_bias = Matrix(1, 2);
    std::vector<double> o = {0.0, 0.0};

    // equal logits
    CHECK(itm_score(o, p) == Approx(0.5));

    // logits (0, ln 3) -> 0.75
    p.itm_bias(0, 1) = std::log(3.0);
    CHECK(itm_score(o, p) == Approx(0.75));

    // logits (-1000, 0) -> ~1 without overflow
    p.itm_bias(0, 0) = -1000.0;
    p.itm_bias(0, 1) = 0.0;
    const double s = itm_score(o, p);
    CHECK(s == Approx(1.0));
    CHECK(std::isfinite(s));
}

TEST_CASE("apply_miss_penalty fills absences with the row minimum", "[reranker]") {
    PartialScoreMatrix p(1, 3);
    p.set(0, 0, 0.9);
    p.set(0, 2, 0.4);
    ScoreMatrix out = apply_miss_penalty(p);
    CHECK(out(0, 0) == 0.9);
    CHECK(out(0, 1) == 0.4);
    CHECK(out(0, 2) == 0.4);

    PartialScoreMatrix full(1, 2);
    full.set(0, 0, 0.1);
    full.set(0, 1, 0.7);
    out = apply_miss_penalty(full);
    CHECK(out(0, 0) == 0.1);
    CHECK(out(0, 1) == 0.7);

    PartialScoreMatrix single(1, 4);
    single.set(0, 2, 0.7);
    out = apply_miss_penalty(single);
    for (std::size_t c = 0; c < 4; ++c) CHECK(out(0, c) == 0.7);

    PartialScoreMatrix empty(1, 3);
    CHECK_THROWS_AS(apply_miss_penalty(empty), DegenerateRowError);
}

TEST_CASE("miss penalty row-min property on random partial matrices", "[reranker]") {
    Rng rng(113);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t rows = 1 + rng.uniform_index(6);
        const std::size_t cols = 2 + rng.uniform_index(10);
        PartialScoreMatrix p(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t guaranteed = rng.uniform_index(cols);
            for (std::size_t c = 0; c < cols; ++c) {
                if (c == guaranteed || rng.uniform() < 0.4) p.set(r, c, rng.gauss());
            }
        }
        ScoreMatrix out = apply_miss_penalty(p);
        for (std::size_t r = 0; r < rows; ++r) {
            double cand_min = 1e300;
            for (std::size_t c = 0; c < cols; ++c) {
                if (p.is_present(r, c)) cand_min = std::min(cand_min, p.values(r, c));
            }
            for (std::size_t c = 0; c < cols; ++c) {
                CHECK(out(r, c) >= cand_min);
                if (p.is_present(r, c)) {
                    CHECK(out(r, c) == p.values(r, c));
                } else {
                    CHECK(out(r, c) == cand_min);
                }
            }
        }
    }
}

TEST_CASE("normalize_rows endpoints, constants, and argsort preservation", "[reranker]") {
    ScoreMatrix s = Matrix::of({{0.2, 0.7}});
    ScoreMatrix out = normalize_rows(s);
    CHECK(out(0, 0) == 0.0);
    CHECK(out(0, 1) == 1.0);

    out = normalize_rows(Matrix::of({{3.0, 3.0, 3.0}}));
    for (std::size_t c = 0; c < 3; ++c) CHECK(out(0, c) == 0.5);

    out = normalize_rows(Matrix::of({{1.0, 2.0, 3.0}}));
    CHECK(out(0, 0) == Approx(0.0));
    CHECK(out(0, 1) == Approx(0.5));
    CHECK(out(0, 2) == Approx(1.0));

    Rng rng(127);
    for (int rep = 0; rep < 50; ++rep) {
        ScoreMatrix random(3, 8);
        for (double& v : random.data()) v = rng.gauss(0.0, 5.0);
        ScoreMatrix normed = normalize_rows(random);
        for (std::size_t r = 0; r < 3; ++r) {
            const auto before = rank_row(random.row(r), 8);
            const auto after = rank_row(normed.row(r), 8);
            CHECK(before == after);
        }
    }
}

TEST_CASE("fuse_scores fusion rules", "[reranker]") {
    ScoreMatrix itm = Matrix::of({{0.1, 0.9}});
    ScoreMatrix init = Matrix::of({{0.8, 0.2}});
    ScoreMatrix fused = fuse_scores(itm, init, 0.0);
    CHECK(max_abs_diff(fused, itm) == 0.0);

    // constant ITM row: ranking determined entirely by init for any alpha > 0
    ScoreMatrix flat = Matrix::of({{0.5, 0.5, 0.5}});
    ScoreMatrix init3 = Matrix::of({{0.1, 0.9, 0.4}});
    fused = fuse_scores(flat, init3, 0.002);
    CHECK(rank_row(fused.row(0), 3) == rank_row(init3.row(0), 3));

    // an ITM gap of 0.01 cannot be overturned by a min-max-normalized init
    // term scaled by alpha = 0.002 (max init influence is 0.002 < 0.01)
    ScoreMatrix itm2 = Matrix::of({{0.51, 0.50}});
    ScoreMatrix init2 = Matrix::of({{0.0, 1.0}});
    fused = fuse_scores(itm2, init2, 0.002);
    CHECK(fused(0, 0) > fused(0, 1));

    CHECK_THROWS_AS(fuse_scores(itm, init3, 0.002), DimensionError);
}

TEST_CASE("fuse_scores is strictly monotone in each argument", "[reranker]") {
    Rng rng(131);
    for (int rep = 0; rep < 100; ++rep) {
        const double itm_a = rng.uniform(), itm_b = rng.uniform();
        const double init_a = rng.uniform(), init_b = rng.uniform();
        ScoreMatrix itm = Matrix::of({{itm_a, itm_b}});
        ScoreMatrix init = Matrix::of({{init_a, init_b}});
        ScoreMatrix fused = fuse_scores(itm, init, 0.002);
        ScoreMatrix bumped_itm = fuse_scores(Matrix::of({{itm_a + 0.1, itm_b}}), init, 0.002);
        ScoreMatrix bumped_init = fuse_scores(itm, Matrix::of({{init_a + 0.1, init_b}}), 0.002);
        CHECK(bumped_itm(0, 0) > fused(0, 0));
        CHECK(bumped_init(0, 0) > fused(0, 0));
        CHECK(bumped_itm(0, 1) == fused(0, 1));
    }
}

TEST_CASE("rerank with K = N and an init-monotone ITM head preserves ordering", "[reranker]") {
    // Zeroed layer output weights make o = v + type_video, and an ITM head
    // whose logit difference is a fixed direction d recovers a score
    // monotone in d . v. With unit-norm video embeddings ranked by the same
    // direction as the query, the fused argsort must equal the initial one.
    const std::size_t d = 4;
    CrossEncoderParams p;
    p.type_video = Matrix(1, d);
    p.type_text = Matrix(1, d);
    Rng rng(137);
    for (std::size_t l = 0; l < 2; ++l) {
        TransformerLayerParams layer = random_layer(rng, d, 2);
        layer.attn.wo = Matrix(d, d);
        layer.mlp_w2 = Matrix(d, 4 * d);
        p.layers.push_back(layer);
    }
    p.itm_weight = Matrix(2, d);
    p.itm_weight(1, 0) = 1.0;  // logit1 - logit0 = v[0]
    p.itm_bias = Matrix(1, 2);
    p.heads = 2;

    Matrix vids(5, d);
    for (std::size_t i = 0; i < 5; ++i) {
        const double angle = 0.2 + 0.25 * static_cast<double>(i);
        vids(i, 0) = std::cos(angle);
        vids(i, 1) = std::sin(angle);
    }
    // both query angles sit below the smallest candidate angle, so each
    // query's cosine ordering equals the descending-angle ordering that the
    // ITM probe direction induces
    Matrix txts(2, d);
    txts(0, 0) = 1.0;
    txts(1, 0) = 0.95;
    txts(1, 1) = 0.15;

    EmbeddingMatrix videos = make_embeddings(vids, "v");
    EmbeddingMatrix texts = make_embeddings(txts, "t");
    ScoreMatrix s_init = similarity_matrix(videos, texts);
    RerankStats stats;
    ScoreMatrix fused = rerank(s_init, videos, texts, p, 5, 0.002,
                               RerankDirection::TextToVideo, &stats);
    CHECK(stats.cross_encoder_evals == 2 * 5);
    for (std::size_t r = 0; r < 2; ++r) {
        CHECK(rank_row(fused.row(r), 5) == rank_row(s_init.row(r), 5));
    }
}

TEST_CASE("rerank with K = 1 ties all non-candidates and falls back to init order", "[reranker]") {
    Rng rng(139);
    const std::size_t d = 6;
    CrossEncoderParams p = random_cross(rng, d, 2);
    Matrix vids = random_matrix(rng, 7, d);
    Matrix txts = random_matrix(rng, 3, d);
    EmbeddingMatrix videos = make_embeddings(vids, "v");
    EmbeddingMatrix texts = make_embeddings(txts, "t");
    ScoreMatrix s_init = similarity_matrix(videos, texts);
    ScoreMatrix fused = rerank(s_init, videos, texts, p, 1, 0.002);

    for (std::size_t r = 0; r < 3; ++r) {
        const auto order = rank_row(fused.row(r), 7);
        const auto init_order = rank_row(s_init.row(r), 7);
        // non-candidates share one ITM value, so their relative order (the
        // tail of the fused ranking) must follow the init ordering
        std::vector<std::size_t> fused_tail, init_tail;
        const std::size_t top = top_k(s_init, 1).rows[r][0];
        for (std::size_t idx : order) {
            if (idx != top) fused_tail.push_back(idx);
        }
        for (std::size_t idx : init_order) {
            if (idx != top) init_tail.push_back(idx);
        }
        CHECK(fused_tail == init_tail);
    }
}

TEST_CASE("rerank touches exactly N_q * min(K, N_v) pairs", "[reranker]") {
    Rng rng(149);
    const std::size_t d = 6;
    CrossEncoderParams p = random_cross(rng, d, 2);
    EmbeddingMatrix videos = make_embeddings(random_matrix(rng, 9, d), "v");
    EmbeddingMatrix texts = make_embeddings(random_matrix(rng, 4, d), "t");
    ScoreMatrix s_init = similarity_matrix(videos, texts);
    for (std::size_t k : {1u, 3u, 9u, 20u}) {
        RerankStats stats;
        rerank(s_init, videos, texts, p, k, 0.002, RerankDirection::TextToVideo, &stats);
        CHECK(stats.cross_encoder_evals == 4 * std::min<std::size_t>(k, 9));
    }
}

TEST_CASE("train_itm separates a toy matching problem", "[reranker]") {
    Rng rng(151);
    const std::size_t d = 8;
    const std::size_t classes = 4;
    const std::size_t per_class = 12;
    Matrix prototypes = random_matrix(rng, classes, d, 1.0);

    const std::size_t n = classes * per_class;
    Matrix vids(n, d), txts(n, d);
    Matrix r(n, n);
    std::vector<std::size_t> cls(n);
    for (std::size_t i = 0; i < n; ++i) {
        cls[i] = i % classes;
        for (std::size_t c = 0; c < d; ++c) {
            vids(i, c) = prototypes(cls[i], c) + rng.gauss(0.0, 0.05);
            txts(i, c) = prototypes(cls[i], c) + rng.gauss(0.0, 0.05);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) r(i, j) = cls[i] == cls[j] ? 1.0 : 0.0;
    }

    EmbeddingMatrix videos = make_embeddings(vids, "v");
    EmbeddingMatrix texts = make_embeddings(txts, "t");

    CrossEncoderParams params = random_cross(rng, d, 2);
    params.itm_weight = random_matrix(rng, 2, d, 0.02);

    // untrained head: first-batch loss is about ln 2
    ItmTrainConfig cfg;
    cfg.steps = 400;
    cfg.batch = 32;
    cfg.lr = 5e-3;
    cfg.seed = 7;
    std::vector<double> losses = train_itm(params, videos, texts, r, cfg);
    REQUIRE(losses.size() == 400);
    CHECK(losses.front() == Approx(std::log(2.0)).epsilon(0.15));
    CHECK(losses.back() < 0.2);

    // held-out style check: accuracy over fresh pairs
    std::size_t correct = 0, total = 0;
    for (int rep = 0; rep < 400; ++rep) {
        const std::size_t i = rng.uniform_index(n);
        const std::size_t j = rng.uniform_index(n);
        const bool match = cls[i] == cls[j];
        const double score = itm_score(
            cross_encode(vids.row_vector(j), txts.row_vector(i), params), params);
        if ((score > 0.5) == match) ++correct;
        ++total;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("train_itm edge cases", "[reranker]") {
    Rng rng(157);
    const std::size_t d = 4;
    CrossEncoderParams params = random_cross(rng, d, 2);
    EmbeddingMatrix videos = make_embeddings(random_matrix(rng, 3, d), "v");
    EmbeddingMatrix texts = make_embeddings(random_matrix(rng, 3, d), "t");

    // zero steps: params untouched
    Matrix r(3, 3);
    for (std::size_t i = 0; i < 3; ++i) r(i, i) = 1.0;
    CrossEncoderParams before = params;
    ItmTrainConfig cfg;
    cfg.steps = 0;
    CHECK(train_itm(params, videos, texts, r, cfg).empty());
    CHECK(max_abs_diff(params.itm_weight, before.itm_weight) == 0.0);
    CHECK(max_abs_diff(params.layers[0].attn.wq, before.layers[0].attn.wq) == 0.0);

    // no positives at all
    Matrix empty(3, 3);
    cfg.steps = 5;
    CHECK_THROWS_AS(train_itm(params, videos, texts, empty, cfg), TrainingError);

    // bad thresholds
    ItmTrainConfig bad;
    bad.theta_pos = 0.1;
    bad.theta_neg = 0.5;
    CHECK_THROWS_AS(train_itm(params, videos, texts, r, bad), ConfigError);
}


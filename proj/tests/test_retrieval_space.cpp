#include <catch2/catch.hpp>

#include <cmath>

#include "tempret/retrieval_space.hpp"
#include "tempret/rng.hpp"
#include "test_helpers.hpp"

using namespace tempret;
using namespace tempret::testing;

namespace {

EmbeddingMatrix make_embeddings(const Matrix& data, const std::string& prefix) {
    EmbeddingMatrix e;
    e.data = data;
    for (std::size_t i = 0; i < data.rows(); ++i) e.ids.push_back(prefix + std::to_string(i));
    return e;
}

}  // namespace


TEST_CASE("encode_text is a plain projection", "[retrieval]") {
    CHECK(max_abs_diff(encode_text({1.0, 0.0}, Matrix::of({{2, 0}, {0, 3}})),
                       {2.0, 0.0}) == 0.0);
    CHECK(max_abs_diff(encode_text({0.0, 0.0}, Matrix::of({{2, 0}, {0, 3}})),
                       {0.0, 0.0}) == 0.0);
    Matrix eye = identity_matrix(3);
    CHECK(max_abs_diff(encode_text({0.3, -1.0, 2.0}, eye), {0.3, -1.0, 2.0}) == 0.0);
    CHECK_THROWS_AS(encode_text({1.0}, eye), DimensionError);
}

TEST_CASE("similarity_matrix matches hand cosine values", "[retrieval]") {
    EmbeddingMatrix videos = make_embeddings(Matrix::of({{1, 0}, {0, 1}, {1, 1}}), "v");
    EmbeddingMatrix texts = make_embeddings(Matrix::of({{1, 0}}), "t");
    ScoreMatrix s = similarity_matrix(videos, texts);
    REQUIRE(s.rows() == 1);
    REQUIRE(s.cols() == 3);
    CHECK(s(0, 0) == Approx(1.0));
    CHECK(s(0, 1) == Approx(0.0));
    CHECK(s(0, 2) == Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("similarity_matrix names the zero-norm offender", "[retrieval]") {
    EmbeddingMatrix videos = make_embeddings(Matrix::of({{1, 0}, {0, 0}}), "clip_");
    EmbeddingMatrix texts = make_embeddings(Matrix::of({{1, 0}}), "cap_");
    try {
        similarity_matrix(videos, texts);
        FAIL("expected NormalizationError");
    } catch (const NormalizationError& e) {
        CHECK(std::string(e.what()).find("clip_1") != std::string::npos);
    }
}

TEST_CASE("similarity is invariant to positive rescaling of an embedding", "[retrieval]") {
    Rng rng(79);
    Matrix vdata = random_matrix(rng, 6, 5);
    Matrix tdata = random_matrix(rng, 4, 5);
    EmbeddingMatrix videos = make_embeddings(vdata, "v");
    EmbeddingMatrix texts = make_embeddings(tdata, "t");
    ScoreMatrix s1 = similarity_matrix(videos, texts);
    for (std::size_t c = 0; c < 5; ++c) videos.data(2, c) *= 37.5;
    for (std::size_t c = 0; c < 5; ++c) texts.data(1, c) *= 0.004;
    ScoreMatrix s2 = similarity_matrix(videos, texts);
    CHECK(max_abs_diff(s1, s2) < 1e-6);
    for (std::size_t i = 0; i < s1.rows(); ++i) {
        for (std::size_t j = 0; j < s1.cols(); ++j) {
            CHECK(s1(i, j) >= -1.0 - 1e-12);
            CHECK(s1(i, j) <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("top_k spec examples", "[retrieval]") {
    ScoreMatrix s = Matrix::of({{0.1, 0.9, 0.5}});
    CandidateSet cs = top_k(s, 2);
    REQUIRE(cs.rows[0].size() == 2);
    CHECK(cs.rows[0][0] == 1);
    CHECK(cs.rows[0][1] == 2);

    cs = top_k(s, 10);  // K >= N_v: full ranking
    REQUIRE(cs.rows[0].size() == 3);
    CHECK(cs.rows[0][0] == 1);
    CHECK(cs.rows[0][1] == 2);
    CHECK(cs.rows[0][2] == 0);

    ScoreMatrix tie = Matrix::of({{0.5, 0.5, 0.1}});
    cs = top_k(tie, 1);
    CHECK(cs.rows[0][0] == 0);  // tie broken by ascending index

    CHECK_THROWS_AS(top_k(s, 0), DimensionError);
}

TEST_CASE("top_k is a prefix of the full sort oracle", "[retrieval]") {
    Rng rng(83);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 1 + rng.uniform_index(20);
        ScoreMatrix s(3, n);
        for (double& v : s.data()) {
            v = rng.uniform() < 0.3 ? 0.5 : rng.gauss();  // force some ties
        }
        const std::size_t k = 1 + rng.uniform_index(n + 3);
        CandidateSet cs = top_k(s, k);
        for (std::size_t r = 0; r < 3; ++r) {
            const std::vector<std::size_t> full = rank_row(s.row(r), n);
            REQUIRE(cs.rows[r].size() == std::min(k, n));
            for (std::size_t i = 0; i < cs.rows[r].size(); ++i) {
                CHECK(cs.rows[r][i] == full[i]);
            }
        }
    }
}


// Shared embedding space: text projection, cosine similarity matrix, and
// Top-K candidate selection (the coarse retrieval stage).
//
// Tie handling everywhere: descending score, then ascending index. The
// Top-K contract fixes only the output; selection uses a partial sort.

#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "tempret/errors.hpp"
#include "tempret/matrix.hpp"

namespace tempret {

/// N embeddings of uniform dimension with stable external ids.
struct EmbeddingMatrix {
    Matrix data;                   // n x dim
    std::vector<std::string> ids;  // length n, unique

    std::size_t count() const { return data.rows(); }
    std::size_t dim() const { return data.cols(); }

    void validate() const {
        if (ids.size() != data.rows()) {
            throw DimensionError("EmbeddingMatrix: id count != row count");
        }
        std::vector<std::string> sorted = ids;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw DimensionError("EmbeddingMatrix: duplicate ids");
        }
    }
};

/// Per-query ordered candidate lists, each of length min(K, N_v).
struct CandidateSet {
    std::size_t k = 0;
    std::vector<std::vector<std::size_t>> rows;
};

/// Project an ingested sentence-level feature into the shared space.
inline std::vector<double> encode_text(const std::vector<double>& text_feat,
                                       const Matrix& w_txt_proj) {
    return vecmat(text_feat, w_txt_proj);
}

/// Cosine similarity with rows = texts (queries) and cols = videos.
inline ScoreMatrix similarity_matrix(const EmbeddingMatrix& videos,
                                     const EmbeddingMatrix& texts) {
    if (videos.dim() != texts.dim()) {
        throw DimensionError("similarity_matrix: embedding dims differ (" +
                             std::to_string(videos.dim()) + " vs " +
                             std::to_string(texts.dim()) + ")");
    }
    auto norms_of = [](const EmbeddingMatrix& e) {
        std::vector<double> norms(e.count());
        for (std::size_t i = 0; i < e.count(); ++i) {
            double acc = 0.0;
            const double* row = e.data.row(i);
            for (std::size_t c = 0; c < e.dim(); ++c) acc += row[c] * row[c];
            if (acc == 0.0) {
                throw NormalizationError("similarity_matrix: zero-norm embedding '" +
                                         e.ids[i] + "'");
            }
            norms[i] = std::sqrt(acc);
        }
        return norms;
    };
    const std::vector<double> vnorm = norms_of(videos);
    const std::vector<double> tnorm = norms_of(texts);

    ScoreMatrix s(texts.count(), videos.count());
    for (std::size_t i = 0; i < texts.count(); ++i) {
        const double* trow = texts.data.row(i);
        for (std::size_t j = 0; j < videos.count(); ++j) {
            const double* vrow = videos.data.row(j);
            double acc = 0.0;
            for (std::size_t c = 0; c < texts.dim(); ++c) acc += trow[c] * vrow[c];
            s(i, j) = acc / (tnorm[i] * vnorm[j]);
        }
    }
    return s;
}

/// Top-K column indices per row, descending score, ties by ascending index.
/// K is clamped to the column count.
inline CandidateSet top_k(const ScoreMatrix& s, std::size_t k) {
    if (k == 0) throw DimensionError("top_k: K must be >= 1");
    const std::size_t n = s.cols();
    const std::size_t take = std::min(k, n);
    CandidateSet out;
    out.k = k;
    out.rows.resize(s.rows());
    std::vector<std::size_t> idx(n);
    for (std::size_t r = 0; r < s.rows(); ++r) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        const double* row = s.row(r);
        auto better = [row](std::size_t a, std::size_t b) {
            if (row[a] != row[b]) return row[a] > row[b];
            return a < b;
        };
        std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take),
                          idx.end(), better);
        out.rows[r].assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    }
    return out;
}

/// Full argsort of one row under the same tie rule as top_k.
inline std::vector<std::size_t> rank_row(const double* row, std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [row](std::size_t a, std::size_t b) {
        if (row[a] != row[b]) return row[a] > row[b];
        return a < b;
    });
    return idx;
}

} // namespace tempret

// Graded-relevance ranking metrics for both retrieval directions.
//
// Ranking convention matches the retrieval module: descending score, ties
// broken by ascending index. mAP binarizes the soft labels (relevant iff
// R > threshold); nDCG uses linear gain with a 1/log2(rank+1) discount.
// Rows with nothing relevant (or zero ideal DCG) are excluded from the
// mean rather than scored as zero.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tempret/errors.hpp"
#include "tempret/matrix.hpp"
#include "tempret/retrieval_space.hpp"

namespace tempret {

struct MetricsReport {
    double map_t2v = 0.0;
    double map_v2t = 0.0;
    double map_avg = 0.0;
    double ndcg_t2v = 0.0;
    double ndcg_v2t = 0.0;
    double ndcg_avg = 0.0;
};

/// Average precision of one ranked list.
inline double average_precision(const std::vector<double>& scores,
                                const std::vector<std::uint8_t>& relevant) {
    if (scores.size() != relevant.size()) {
        throw DimensionError("average_precision: length mismatch");
    }
    std::size_t n_relevant = 0;
    for (auto r : relevant) {
        if (r) ++n_relevant;
    }
    if (n_relevant == 0) {
        throw UndefinedMetricError("average_precision: no relevant items");
    }
    const std::vector<std::size_t> order = rank_row(scores.data(), scores.size());
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (relevant[order[rank]]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
        }
    }
    return sum / static_cast<double>(n_relevant);
}

/// Mean AP over rows with at least one relevant item (R > threshold).
inline double mean_average_precision(const ScoreMatrix& s, const RelevanceMatrix& r,
                                     double threshold = 0.0) {
    require_same_shape(s, r, "mean_average_precision");
    double total = 0.0;
    std::size_t rows_used = 0;
    std::vector<std::uint8_t> relevant(s.cols());
    std::vector<double> scores(s.cols());
    for (std::size_t i = 0; i < s.rows(); ++i) {
        bool any = false;
        for (std::size_t j = 0; j < s.cols(); ++j) {
            relevant[j] = r(i, j) > threshold ? 1 : 0;
            scores[j] = s(i, j);
            any = any || relevant[j];
        }
        if (!any) continue;
        total += average_precision(scores, relevant);
        ++rows_used;
    }
    if (rows_used == 0) {
        throw UndefinedMetricError("mean_average_precision: no evaluable rows");
    }
    return total / static_cast<double>(rows_used);
}

/// Mean nDCG with linear gain over rows with positive ideal DCG.
inline double ndcg(const ScoreMatrix& s, const RelevanceMatrix& r) {
    require_same_shape(s, r, "ndcg");
    double total = 0.0;
    std::size_t rows_used = 0;
    std::vector<double> gains(s.cols());
    for (std::size_t i = 0; i < s.rows(); ++i) {
        const std::vector<std::size_t> order = rank_row(s.row(i), s.cols());
        double dcg = 0.0;
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
            dcg += r(i, order[rank]) / std::log2(static_cast<double>(rank) + 2.0);
        }
        for (std::size_t j = 0; j < s.cols(); ++j) gains[j] = r(i, j);
        std::sort(gains.begin(), gains.end(), std::greater<double>());
        double idcg = 0.0;
        for (std::size_t rank = 0; rank < gains.size(); ++rank) {
            idcg += gains[rank] / std::log2(static_cast<double>(rank) + 2.0);
        }
        if (idcg <= 0.0) continue;
        total += dcg / idcg;
        ++rows_used;
    }
    if (rows_used == 0) {
        throw UndefinedMetricError("ndcg: relevance matrix has no positive rows");
    }
    return total / static_cast<double>(rows_used);
}

/// Both directions from the T2V matrix; V2T uses the transposes.
inline MetricsReport evaluate(const ScoreMatrix& s_t2v, const RelevanceMatrix& r,
                              double map_threshold = 0.0) {
    MetricsReport report;
    const Matrix s_v2t = transpose(s_t2v);
    const Matrix r_v2t = transpose(r);
    report.map_t2v = mean_average_precision(s_t2v, r, map_threshold);
    report.map_v2t = mean_average_precision(s_v2t, r_v2t, map_threshold);
    report.ndcg_t2v = ndcg(s_t2v, r);
    report.ndcg_v2t = ndcg(s_v2t, r_v2t);
    report.map_avg = 0.5 * (report.map_t2v + report.map_v2t);
    report.ndcg_avg = 0.5 * (report.ndcg_t2v + report.ndcg_v2t);
    return report;
}

/// Same report shape when the two directions were scored by different
/// matrices (reranking produces one fused matrix per direction).
inline MetricsReport evaluate_directions(const ScoreMatrix& s_t2v, const ScoreMatrix& s_v2t,
                                         const RelevanceMatrix& r, double map_threshold = 0.0) {
    MetricsReport report;
    const Matrix r_v2t = transpose(r);
    report.map_t2v = mean_average_precision(s_t2v, r, map_threshold);
    report.map_v2t = mean_average_precision(s_v2t, r_v2t, map_threshold);
    report.ndcg_t2v = ndcg(s_t2v, r);
    report.ndcg_v2t = ndcg(s_v2t, r_v2t);
    report.map_avg = 0.5 * (report.map_t2v + report.map_v2t);
    report.ndcg_avg = 0.5 * (report.ndcg_t2v + report.ndcg_v2t);
    return report;
}

} // namespace tempret

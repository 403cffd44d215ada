// End-to-end orchestration: encode a dataset, run retrieval and reranking in
// both directions, evaluate, and drive the four-way ablation. Every function
// is a pure function of (params, dataset, options); repeated invocations
// produce identical results, which the determinism tests pin down at the
// byte level.

#pragma once

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "tempret/config.hpp"
#include "tempret/evaluation.hpp"
#include "tempret/matrix.hpp"
#include "tempret/reranker.hpp"
#include "tempret/retrieval_space.hpp"
#include "tempret/synthetic.hpp"
#include "tempret/trainer.hpp"

namespace tempret {

struct EncodedDataset {
    EmbeddingMatrix videos;
    EmbeddingMatrix texts;
};

inline EncodedDataset encode_dataset(const ModelParams& params, const DatasetBundle& bundle) {
    EncodedDataset out;
    out.videos.data = Matrix(bundle.clip_count(), params.dims.dim);
    out.videos.ids = bundle.clip_ids;
    for (std::size_t i = 0; i < bundle.clip_count(); ++i) {
        out.videos.data.set_row(i, encode_clip(params, bundle.clip_sequence(i)));
    }
    out.texts.data = Matrix(bundle.caption_count(), params.dims.dim);
    out.texts.ids = bundle.caption_ids;
    for (std::size_t i = 0; i < bundle.caption_count(); ++i) {
        out.texts.data.set_row(i, encode_caption(params, bundle.texts.row_vector(i)));
    }
    return out;
}

struct EvalOptions {
    bool rerank = true;
    std::size_t k = 1000;
    double alpha = 0.002;
    double map_threshold = 0.0;

    static EvalOptions from_config(const RunConfig& c, bool rerank_enabled) {
        EvalOptions o;
        o.rerank = rerank_enabled;
        o.k = c.k;
        o.alpha = c.alpha;
        o.map_threshold = c.map_threshold;
        return o;
    }
};

struct EvalResult {
    MetricsReport report;
    ScoreMatrix s_init;       // raw cosine matrix, texts x videos
    ScoreMatrix final_t2v;    // equals s_init when reranking is off
    ScoreMatrix final_v2t;    // oriented videos x texts
};

/// Full retrieval evaluation: stage-1 cosine scores, optional stage-2
/// reranking applied independently per direction, metrics on the result.
inline EvalResult run_eval(const ModelParams& params, const DatasetBundle& bundle,
                           const EvalOptions& options) {
    EvalResult result;
    const EncodedDataset encoded = encode_dataset(params, bundle);
    result.s_init = similarity_matrix(encoded.videos, encoded.texts);
    if (options.rerank) {
        result.final_t2v = rerank(result.s_init, encoded.videos, encoded.texts, params.cross,
                                  options.k, options.alpha, RerankDirection::TextToVideo);
        result.final_v2t = rerank(transpose(result.s_init), encoded.videos, encoded.texts,
                                  params.cross, options.k, options.alpha,
                                  RerankDirection::VideoToText);
    } else {
        result.final_t2v = result.s_init;
        result.final_v2t = transpose(result.s_init);
    }
    result.report = evaluate_directions(result.final_t2v, result.final_v2t, bundle.relevance,
                                        options.map_threshold);
    return result;
}

// ---------------------------------------------------------------------------
// report formatting
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
    return std::string(buf);
}

inline std::string format_fraction(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", fraction);
    return std::string(buf);
}

}  // namespace detail

/// Human-readable report (values in percent).
inline std::string report_text(const MetricsReport& r) {
    std::string out;
    out += "metric      avg     t2v     v2t\n";
    out += "mAP       " + detail::format_pct(r.map_avg) + "   " + detail::format_pct(r.map_t2v) +
           "   " + detail::format_pct(r.map_v2t) + "\n";
    out += "nDCG      " + detail::format_pct(r.ndcg_avg) + "   " +
           detail::format_pct(r.ndcg_t2v) + "   " + detail::format_pct(r.ndcg_v2t) + "\n";
    return out;
}

/// Machine-readable key=value records (fractions, 6 decimals).
inline std::string report_records(const MetricsReport& r) {
    std::string out;
    out += "map_t2v=" + detail::format_fraction(r.map_t2v) + "\n";
    out += "map_v2t=" + detail::format_fraction(r.map_v2t) + "\n";
    out += "map_avg=" + detail::format_fraction(r.map_avg) + "\n";
    out += "ndcg_t2v=" + detail::format_fraction(r.ndcg_t2v) + "\n";
    out += "ndcg_v2t=" + detail::format_fraction(r.ndcg_v2t) + "\n";
    out += "ndcg_avg=" + detail::format_fraction(r.ndcg_avg) + "\n";
    return out;
}

/// Ranked candidate lists, one line per query: "query_id<TAB>cand:score,...".
inline std::string ranked_list_text(const ScoreMatrix& s,
                                    const std::vector<std::string>& query_ids,
                                    const std::vector<std::string>& candidate_ids,
                                    std::size_t k) {
    const CandidateSet candidates = top_k(s, k);
    std::string out;
    for (std::size_t r = 0; r < s.rows(); ++r) {
        out += query_ids[r];
        out += '\t';
        bool first = true;
        for (std::size_t c : candidates.rows[r]) {
            if (!first) out += ',';
            first = false;
            char buf[48];
            std::snprintf(buf, sizeof(buf), "%s:%.6f", candidate_ids[c].c_str(), s(r, c));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// ablation harness
// ---------------------------------------------------------------------------

struct AblationRow {
    std::string name;
    bool temporal = true;
    bool rerank = true;
    MetricsReport report;
};

/// Train and evaluate the four component configurations on one dataset with
/// one shared seed: the full system, reranking removed, the temporal
/// transformer replaced by mean pooling, and both removed. Shared components
/// start from identical initial parameters in all four runs.
inline std::vector<AblationRow> run_ablation(const RunConfig& config,
                                             const DatasetBundle& bundle,
                                             const TrainHooks& hooks = {}) {
    std::vector<AblationRow> rows = {
        {"full", true, true, {}},
        {"no-rerank", true, false, {}},
        {"no-temporal", false, true, {}},
        {"no-temporal-no-rerank", false, false, {}},
    };
    for (AblationRow& row : rows) {
        TrainResult trained = run_train(config, bundle, row.temporal, row.rerank, hooks);
        row.report =
            run_eval(trained.params, bundle, EvalOptions::from_config(config, row.rerank)).report;
    }
    return rows;
}

inline std::string ablation_table_text(const std::vector<AblationRow>& rows) {
    std::string out = "setting                  avg-mAP  avg-nDCG\n";
    for (const AblationRow& row : rows) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%-24s %7s %9s\n", row.name.c_str(),
                      detail::format_pct(row.report.map_avg).c_str(),
                      detail::format_pct(row.report.ndcg_avg).c_str());
        out += buf;
    }
    return out;
}

inline std::string ablation_table_records(const std::vector<AblationRow>& rows) {
    std::string out;
    for (const AblationRow& row : rows) {
        out += row.name + ".map_avg=" + detail::format_fraction(row.report.map_avg) + "\n";
        out += row.name + ".ndcg_avg=" + detail::format_fraction(row.report.ndcg_avg) + "\n";
    }
    return out;
}

} // namespace tempret

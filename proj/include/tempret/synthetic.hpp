// Synthetic order-sensitive retrieval benchmark.
//
// Latent "action step" prototypes are arranged into classes where the *order*
// of steps is what separates classes. Classes come in groups of four sharing
// one step pool:
//   role 0: base order            role 1: rotated order (no position agrees
//                                          with the base -> pooled features
//                                          collide, graded relevance 0)
//   role 2: base with steps 0,1   role 3: rotation with steps 2,3 swapped
//           swapped (6/8 positions        (partial credit against role 1)
//           agree with the base ->
//           graded partial credit)
//
// Clips show their class's step sequence plus gaussian noise; captions are
// class text prototypes plus noise. Relevance: 1.0 for the same class,
// 0.5 * (fraction of agreeing positions) within a group, 0 across groups.
// Any encoder that ignores frame order cannot tell a class from its rotated
// sibling, which is exactly what the ablation harness measures.
//
// All generated values are quantized through f32 so an in-memory bundle is
// bit-identical to one saved and reloaded.

#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "tempret/config.hpp"
#include "tempret/errors.hpp"
#include "tempret/matrix.hpp"
#include "tempret/rng.hpp"
#include "tempret/serialization.hpp"
#include "tempret/temporal_encoder.hpp"

namespace tempret {

struct SyntheticParams {
    std::size_t n_clips = 2000;
    std::size_t n_captions = 2000;
    std::size_t frames = 8;
    std::size_t min_frames = 8;
    std::size_t d_in_video = 64;
    std::size_t d_in_text = 64;
    std::size_t n_classes = 40;
    double noise = 0.005;

    static SyntheticParams from_config(const RunConfig& c) {
        SyntheticParams p;
        p.n_clips = c.n_clips;
        p.n_captions = c.n_captions;
        p.frames = c.frames;
        p.min_frames = c.min_frames;
        p.d_in_video = c.d_in_video;
        p.d_in_text = c.d_in_text;
        p.n_classes = c.n_classes;
        p.noise = c.noise;
        return p;
    }

    void validate() const {
        if (n_clips == 0) throw ConfigError("synthetic: n_clips must be >= 1");
        if (n_captions != n_clips) {
            throw ConfigError("synthetic: n_captions must equal n_clips (one caption per clip)");
        }
        if (frames < 4) throw ConfigError("synthetic: need at least 4 frames per clip");
        if (min_frames == 0 || min_frames > frames) {
            throw ConfigError("synthetic: min_frames must be in [1, frames]");
        }
        if (n_classes == 0 || n_classes % 4 != 0) {
            throw ConfigError("synthetic: n_classes must be a positive multiple of 4");
        }
        if (d_in_video == 0 || d_in_text == 0) {
            throw ConfigError("synthetic: feature dims must be >= 1");
        }
        if (noise < 0.0) throw ConfigError("synthetic: noise must be >= 0");
    }
};

struct DatasetBundle {
    SyntheticParams params;
    std::uint64_t seed = 0;

    Matrix frames;                        // (n_clips * frames) x d_in_video
    std::vector<std::size_t> clip_frames; // valid frame count per clip
    std::vector<std::string> clip_ids;
    std::vector<std::size_t> clip_class;

    Matrix texts;                         // n_captions x d_in_text
    std::vector<std::string> caption_ids;
    std::vector<std::size_t> caption_class;

    RelevanceMatrix relevance;            // n_captions x n_clips

    std::vector<std::size_t> class_group; // per class
    std::vector<std::size_t> class_role;  // 0..3 within the group

    std::size_t clip_count() const { return clip_ids.size(); }
    std::size_t caption_count() const { return caption_ids.size(); }

    FrameSequence clip_sequence(std::size_t clip) const {
        const std::size_t t = params.frames;
        FrameSequence seq;
        seq.features = Matrix(t, params.d_in_video);
        seq.mask.assign(t, 0);
        for (std::size_t f = 0; f < t; ++f) {
            seq.features.set_row(f, frames.row_vector(clip * t + f));
            seq.mask[f] = f < clip_frames[clip] ? 1 : 0;
        }
        return seq;
    }
};

namespace detail {

inline double quantize_f32(double v) {
    return static_cast<double>(static_cast<float>(v));
}

inline std::string format_id(const char* prefix, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%06zu", prefix, index);
    return std::string(buf);
}

inline std::vector<double> unit_gaussian(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.gauss();
    const double n = norm2(v);
    for (double& x : v) x /= n > 0.0 ? n : 1.0;
    return v;
}

/// Step order of one class within its group's pool (indices 0..frames-1).
inline std::vector<std::size_t> class_order(std::size_t role, std::size_t frames) {
    std::vector<std::size_t> order(frames);
    const std::size_t rot = frames / 2;
    for (std::size_t t = 0; t < frames; ++t) {
        order[t] = role == 0 || role == 2 ? t : (t + rot) % frames;
    }
    if (role == 2) std::swap(order[0], order[1]);
    if (role == 3) std::swap(order[2], order[3]);
    return order;
}

}  // namespace detail

inline DatasetBundle generate_synthetic(const SyntheticParams& params, std::uint64_t seed) {
    params.validate();
    DatasetBundle bundle;
    bundle.params = params;
    bundle.seed = seed;

    Rng rng(seed);
    const std::size_t t = params.frames;
    const std::size_t n_groups = params.n_classes / 4;

    // step pools and text prototypes, in a fixed order
    std::vector<Matrix> pool_steps;  // per group: frames x d_in_video
    pool_steps.reserve(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g) {
        Matrix steps(t, params.d_in_video);
        for (std::size_t s = 0; s < t; ++s) {
            steps.set_row(s, detail::unit_gaussian(rng, params.d_in_video));
        }
        pool_steps.push_back(std::move(steps));
    }
    Matrix text_protos(params.n_classes, params.d_in_text);
    for (std::size_t c = 0; c < params.n_classes; ++c) {
        text_protos.set_row(c, detail::unit_gaussian(rng, params.d_in_text));
    }

    std::vector<std::vector<std::size_t>> orders(params.n_classes);
    bundle.class_group.resize(params.n_classes);
    bundle.class_role.resize(params.n_classes);
    for (std::size_t c = 0; c < params.n_classes; ++c) {
        bundle.class_group[c] = c / 4;
        bundle.class_role[c] = c % 4;
        orders[c] = detail::class_order(c % 4, t);
    }

    // clips
    bundle.frames = Matrix(params.n_clips * t, params.d_in_video);
    bundle.clip_frames.resize(params.n_clips);
    for (std::size_t i = 0; i < params.n_clips; ++i) {
        const std::size_t cls = i % params.n_classes;
        bundle.clip_ids.push_back(detail::format_id("clip_", i));
        bundle.clip_class.push_back(cls);
        const std::size_t valid =
            params.min_frames == t
                ? t
                : params.min_frames + rng.uniform_index(t - params.min_frames + 1);
        bundle.clip_frames[i] = valid;
        const Matrix& steps = pool_steps[cls / 4];
        for (std::size_t f = 0; f < valid; ++f) {
            const double* proto = steps.row(orders[cls][f]);
            for (std::size_t d = 0; d < params.d_in_video; ++d) {
                bundle.frames(i * t + f, d) =
                    detail::quantize_f32(proto[d] + params.noise * rng.gauss());
            }
        }
    }

    // captions, one per clip, batch-aligned with the clip index
    bundle.texts = Matrix(params.n_captions, params.d_in_text);
    for (std::size_t i = 0; i < params.n_captions; ++i) {
        const std::size_t cls = i % params.n_classes;
        bundle.caption_ids.push_back(detail::format_id("cap_", i));
        bundle.caption_class.push_back(cls);
        for (std::size_t d = 0; d < params.d_in_text; ++d) {
            bundle.texts(i, d) =
                detail::quantize_f32(text_protos(cls, d) + params.noise * rng.gauss());
        }
    }

    // relevance from class identity and positional overlap within a group
    Matrix class_rel(params.n_classes, params.n_classes);
    for (std::size_t a = 0; a < params.n_classes; ++a) {
        for (std::size_t b = 0; b < params.n_classes; ++b) {
            if (a == b) {
                class_rel(a, b) = 1.0;
            } else if (a / 4 == b / 4) {
                std::size_t agree = 0;
                for (std::size_t f = 0; f < t; ++f) {
                    if (orders[a][f] == orders[b][f]) ++agree;
                }
                class_rel(a, b) = detail::quantize_f32(
                    0.5 * static_cast<double>(agree) / static_cast<double>(t));
            } else {
                class_rel(a, b) = 0.0;
            }
        }
    }
    bundle.relevance = Matrix(params.n_captions, params.n_clips);
    for (std::size_t i = 0; i < params.n_captions; ++i) {
        for (std::size_t j = 0; j < params.n_clips; ++j) {
            bundle.relevance(i, j) = class_rel(bundle.caption_class[i], bundle.clip_class[j]);
        }
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// dataset directory layout
// ---------------------------------------------------------------------------
//
//   meta.txt        generation parameters (key=value, includes the seed)
//   frames.bin      TRETEMB1, one row per clip-frame, "clip_xxx#t" ids
//   texts.bin       TRETEMB1, one row per caption
//   relevance.bin   TRETREL1, captions x clips
//   clips.txt       clip_id TAB class TAB valid_frames
//   captions.txt    caption_id TAB class
//   classes.txt     class TAB group TAB role

inline void save_dataset(const std::string& dir, const DatasetBundle& bundle) {
    {
        std::ofstream meta(dir + "/meta.txt", std::ios::trunc);
        if (!meta) throw IoError("cannot open for writing: " + dir + "/meta.txt");
        meta << "data.n_clips=" << bundle.params.n_clips << '\n'
             << "data.n_captions=" << bundle.params.n_captions << '\n'
             << "data.frames=" << bundle.params.frames << '\n'
             << "data.min_frames=" << bundle.params.min_frames << '\n'
             << "data.d_in_video=" << bundle.params.d_in_video << '\n'
             << "data.d_in_text=" << bundle.params.d_in_text << '\n'
             << "data.classes=" << bundle.params.n_classes << '\n'
             << "data.noise=" << bundle.params.noise << '\n'
             << "seed=" << bundle.seed << '\n';
    }
    EmbeddingMatrix frame_rows;
    frame_rows.data = bundle.frames;
    for (std::size_t i = 0; i < bundle.clip_count(); ++i) {
        for (std::size_t f = 0; f < bundle.params.frames; ++f) {
            frame_rows.ids.push_back(bundle.clip_ids[i] + "#" + std::to_string(f));
        }
    }
    save_embeddings(dir + "/frames.bin", frame_rows);

    EmbeddingMatrix text_rows;
    text_rows.data = bundle.texts;
    text_rows.ids = bundle.caption_ids;
    save_embeddings(dir + "/texts.bin", text_rows);

    save_relevance(dir + "/relevance.bin", bundle.relevance);

    std::ofstream clips(dir + "/clips.txt", std::ios::trunc);
    if (!clips) throw IoError("cannot open for writing: " + dir + "/clips.txt");
    for (std::size_t i = 0; i < bundle.clip_count(); ++i) {
        clips << bundle.clip_ids[i] << '\t' << bundle.clip_class[i] << '\t'
              << bundle.clip_frames[i] << '\n';
    }
    std::ofstream captions(dir + "/captions.txt", std::ios::trunc);
    if (!captions) throw IoError("cannot open for writing: " + dir + "/captions.txt");
    for (std::size_t i = 0; i < bundle.caption_count(); ++i) {
        captions << bundle.caption_ids[i] << '\t' << bundle.caption_class[i] << '\n';
    }
    std::ofstream classes(dir + "/classes.txt", std::ios::trunc);
    if (!classes) throw IoError("cannot open for writing: " + dir + "/classes.txt");
    for (std::size_t c = 0; c < bundle.class_group.size(); ++c) {
        classes << c << '\t' << bundle.class_group[c] << '\t' << bundle.class_role[c] << '\n';
    }
}

namespace detail {

inline std::vector<std::vector<std::string>> read_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace detail

inline DatasetBundle load_dataset(const std::string& dir) {
    DatasetBundle bundle;
    {
        std::ifstream meta(dir + "/meta.txt");
        if (!meta) throw IoError("cannot open for reading: " + dir + "/meta.txt");
        RunConfig scratch;
        for (const auto& [key, value] : parse_config_text(meta)) {
            apply_config_entry(scratch, key, value);
        }
        bundle.params = SyntheticParams::from_config(scratch);
        bundle.seed = scratch.seed;
    }
    bundle.params.validate();

    EmbeddingMatrix frame_rows = load_embeddings(dir + "/frames.bin");
    bundle.frames = std::move(frame_rows.data);
    EmbeddingMatrix text_rows = load_embeddings(dir + "/texts.bin");
    bundle.texts = std::move(text_rows.data);
    bundle.caption_ids = std::move(text_rows.ids);
    bundle.relevance = load_relevance(dir + "/relevance.bin");

    for (const auto& fields : detail::read_tsv(dir + "/clips.txt")) {
        if (fields.size() != 3) throw FormatError(dir + "/clips.txt: expected 3 fields");
        bundle.clip_ids.push_back(fields[0]);
        bundle.clip_class.push_back(std::stoul(fields[1]));
        bundle.clip_frames.push_back(std::stoul(fields[2]));
    }
    for (const auto& fields : detail::read_tsv(dir + "/captions.txt")) {
        if (fields.size() != 2) throw FormatError(dir + "/captions.txt: expected 2 fields");
        bundle.caption_class.push_back(std::stoul(fields[1]));
    }
    for (const auto& fields : detail::read_tsv(dir + "/classes.txt")) {
        if (fields.size() != 3) throw FormatError(dir + "/classes.txt: expected 3 fields");
        bundle.class_group.push_back(std::stoul(fields[1]));
        bundle.class_role.push_back(std::stoul(fields[2]));
    }

    if (bundle.frames.rows() != bundle.clip_count() * bundle.params.frames ||
        bundle.relevance.rows() != bundle.caption_count() ||
        bundle.relevance.cols() != bundle.clip_count()) {
        throw FormatError(dir + ": inconsistent dataset shapes");
    }
    return bundle;
}

} // namespace tempret

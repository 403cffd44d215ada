// Run configuration: flat dotted-key/value text files layered over embedded
// defaults, with CLI flags applied last. An empty config runs the reference
// hyperparameters (L=4, D=512, 8 heads, m=0.2, tau=0.1, lr=1.8e-5, batch 64,
// K=1000, alpha=0.002, 2x temporal learning rate) on the synthetic data
// profile. `desk_profile` shrinks the model so a full train/eval cycle takes
// CPU minutes while keeping the data order-sensitive.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "tempret/errors.hpp"

namespace tempret {

struct RunConfig {
    // model
    std::size_t layers = 4;
    std::size_t dim = 512;
    std::size_t heads = 8;
    std::size_t t_max = 64;
    std::size_t cross_layers = 2;
    bool gelu_exact = false;

    // loss
    double margin = 0.2;
    double tau = 0.1;
    double epsilon = 0.01;

    // optimizer
    double lr = 1.8e-5;
    std::size_t batch = 64;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    double temporal_lr_mult = 2.0;
    std::size_t epochs = 5;

    // reranking
    std::size_t k = 1000;
    double alpha = 0.002;
    double theta_pos = 0.5;
    double theta_neg = 0.1;
    std::size_t itm_steps = 300;
    std::size_t itm_batch = 64;
    double itm_lr = 1e-3;

    // evaluation
    double map_threshold = 0.0;

    // synthetic data
    std::size_t n_clips = 2000;
    std::size_t n_captions = 2000;
    std::size_t frames = 8;
    std::size_t min_frames = 8;
    std::size_t d_in_video = 64;
    std::size_t d_in_text = 64;
    std::size_t n_classes = 40;
    double noise = 0.005;

    std::uint64_t seed = 42;

    /// Small-model profile for desk-scale runs (same data scale, shrunk
    /// encoder, stronger from-scratch learning rate, trimmed Top-K).
    static RunConfig desk_profile() {
        RunConfig c;
        c.layers = 2;
        c.dim = 64;
        c.heads = 8;
        c.t_max = 64;
        c.lr = 2e-3;
        c.weight_decay = 0.0;
        c.epochs = 12;
        c.k = 50;
        c.itm_steps = 400;
        c.itm_lr = 3e-3;
        return c;
    }

    void validate() const {
        if (layers == 0) throw ConfigError("model.layers must be >= 1");
        if (dim == 0 || heads == 0 || dim % heads != 0) {
            throw ConfigError("model.dim must be a positive multiple of model.heads");
        }
        if (t_max == 0) throw ConfigError("model.t_max must be >= 1");
        if (margin <= 0.0) throw ConfigError("loss.margin must be > 0");
        if (tau < 0.0 || epsilon < 0.0) throw ConfigError("loss.tau/epsilon must be >= 0");
        if (batch < 2) throw ConfigError("optim.batch must be >= 2");
        if (k == 0) throw ConfigError("rerank.k must be >= 1");
        if (!(theta_neg >= 0.0 && theta_neg < theta_pos && theta_pos <= 1.0)) {
            throw ConfigError("rerank thresholds must satisfy 0 <= neg < pos <= 1");
        }
        if (n_clips == 0 || n_captions == 0) throw ConfigError("data sizes must be >= 1");
        if (frames == 0 || min_frames == 0 || min_frames > frames) {
            throw ConfigError("data.min_frames must be in [1, data.frames]");
        }
        if (n_classes == 0 || n_classes % 4 != 0) {
            throw ConfigError("data.classes must be a positive multiple of 4");
        }
        if (noise < 0.0) throw ConfigError("data.noise must be >= 0");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

inline double parse_double(const std::string& key, const std::string& value) {
    std::istringstream stream(value);
    double v;
    if (!(stream >> v)) throw ConfigError("config: bad number for " + key + ": " + value);
    return v;
}

inline std::size_t parse_count(const std::string& key, const std::string& value) {
    const double v = parse_double(key, value);
    if (v < 0.0 || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
        throw ConfigError("config: " + key + " must be a nonnegative integer");
    }
    return static_cast<std::size_t>(v);
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: bad boolean for " + key + ": " + value);
}

} // namespace detail

/// Parse "key = value" lines; '#' starts a comment.
inline std::map<std::string, std::string> parse_config_text(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
    }
    return kv;
}

inline void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value) {
    using detail::parse_bool;
    using detail::parse_count;
    using detail::parse_double;
    if (key == "model.layers") c.layers = parse_count(key, value);
    else if (key == "model.dim") c.dim = parse_count(key, value);
    else if (key == "model.heads") c.heads = parse_count(key, value);
    else if (key == "model.t_max") c.t_max = parse_count(key, value);
    else if (key == "model.cross_layers") c.cross_layers = parse_count(key, value);
    else if (key == "model.gelu_exact") c.gelu_exact = parse_bool(key, value);
    else if (key == "loss.margin") c.margin = parse_double(key, value);
    else if (key == "loss.tau") c.tau = parse_double(key, value);
    else if (key == "loss.epsilon") c.epsilon = parse_double(key, value);
    else if (key == "optim.lr") c.lr = parse_double(key, value);
    else if (key == "optim.batch") c.batch = parse_count(key, value);
    else if (key == "optim.beta1") c.beta1 = parse_double(key, value);
    else if (key == "optim.beta2") c.beta2 = parse_double(key, value);
    else if (key == "optim.eps") c.adam_eps = parse_double(key, value);
    else if (key == "optim.weight_decay") c.weight_decay = parse_double(key, value);
    else if (key == "optim.temporal_lr_mult") c.temporal_lr_mult = parse_double(key, value);
    else if (key == "optim.epochs") c.epochs = parse_count(key, value);
    else if (key == "rerank.k") c.k = parse_count(key, value);
    else if (key == "rerank.alpha") c.alpha = parse_double(key, value);
    else if (key == "rerank.theta_pos") c.theta_pos = parse_double(key, value);
    else if (key == "rerank.theta_neg") c.theta_neg = parse_double(key, value);
    else if (key == "rerank.itm_steps") c.itm_steps = parse_count(key, value);
    else if (key == "rerank.itm_batch") c.itm_batch = parse_count(key, value);
    else if (key == "rerank.itm_lr") c.itm_lr = parse_double(key, value);
    else if (key == "eval.map_threshold") c.map_threshold = parse_double(key, value);
    else if (key == "data.n_clips") c.n_clips = parse_count(key, value);
    else if (key == "data.n_captions") c.n_captions = parse_count(key, value);
    else if (key == "data.frames") c.frames = parse_count(key, value);
    else if (key == "data.min_frames") c.min_frames = parse_count(key, value);
    else if (key == "data.d_in_video") c.d_in_video = parse_count(key, value);
    else if (key == "data.d_in_text") c.d_in_text = parse_count(key, value);
    else if (key == "data.classes") c.n_classes = parse_count(key, value);
    else if (key == "data.noise") c.noise = parse_double(key, value);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_count(key, value));
    else throw ConfigError("config: unknown key '" + key + "'");
}

/// Load a config file on top of `base` (typically RunConfig{} defaults).
inline RunConfig load_config_file(const std::string& path, RunConfig base = RunConfig{}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    for (const auto& [key, value] : parse_config_text(in)) {
        apply_config_entry(base, key, value);
    }
    base.validate();
    return base;
}

/// Serialize a config back to the same flat key=value form.
inline std::string config_to_text(const RunConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "model.layers=" << c.layers << '\n'
        << "model.dim=" << c.dim << '\n'
        << "model.heads=" << c.heads << '\n'
        << "model.t_max=" << c.t_max << '\n'
        << "model.cross_layers=" << c.cross_layers << '\n'
        << "model.gelu_exact=" << (c.gelu_exact ? "true" : "false") << '\n'
        << "loss.margin=" << c.margin << '\n'
        << "loss.tau=" << c.tau << '\n'
        << "loss.epsilon=" << c.epsilon << '\n'
        << "optim.lr=" << c.lr << '\n'
        << "optim.batch=" << c.batch << '\n'
        << "optim.beta1=" << c.beta1 << '\n'
        << "optim.beta2=" << c.beta2 << '\n'
        << "optim.eps=" << c.adam_eps << '\n'
        << "optim.weight_decay=" << c.weight_decay << '\n'
        << "optim.temporal_lr_mult=" << c.temporal_lr_mult << '\n'
        << "optim.epochs=" << c.epochs << '\n'
        << "rerank.k=" << c.k << '\n'
        << "rerank.alpha=" << c.alpha << '\n'
        << "rerank.theta_pos=" << c.theta_pos << '\n'
        << "rerank.theta_neg=" << c.theta_neg << '\n'
        << "rerank.itm_steps=" << c.itm_steps << '\n'
        << "rerank.itm_batch=" << c.itm_batch << '\n'
        << "rerank.itm_lr=" << c.itm_lr << '\n'
        << "eval.map_threshold=" << c.map_threshold << '\n'
        << "data.n_clips=" << c.n_clips << '\n'
        << "data.n_captions=" << c.n_captions << '\n'
        << "data.frames=" << c.frames << '\n'
        << "data.min_frames=" << c.min_frames << '\n'
        << "data.d_in_video=" << c.d_in_video << '\n'
        << "data.d_in_text=" << c.d_in_text << '\n'
        << "data.classes=" << c.n_classes << '\n'
        << "data.noise=" << c.noise << '\n'
        << "seed=" << c.seed << '\n';
    return out.str();
}

} // namespace tempret

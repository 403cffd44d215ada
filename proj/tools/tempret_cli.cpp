// tempret command-line driver.
//
// Subcommands: generate, train, encode, retrieve, rerank, eval, ablate.
// Each command reads/writes only the documented file formats and exits with
// a distinct nonzero code per error class (see the handler in main and the
// README table).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tempret/config.hpp"
#include "tempret/errors.hpp"
#include "tempret/pipeline.hpp"
#include "tempret/serialization.hpp"
#include "tempret/synthetic.hpp"
#include "tempret/trainer.hpp"

namespace {

using namespace tempret;

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << content;
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

struct CommonOpts {
    std::string config_path;
    std::int64_t seed = -1;  // -1: keep the config value

    RunConfig load() const {
        RunConfig config = config_path.empty() ? RunConfig{} : load_config_file(config_path);
        if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
        config.validate();
        return config;
    }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "flat key=value configuration file");
    cmd->add_option("--seed", opts.seed, "override the config seed");
}

TrainHooks logging_hooks() {
    TrainHooks hooks;
    hooks.on_step = [](std::size_t step, std::size_t total, double loss) {
        const std::size_t every = std::max<std::size_t>(1, total / 20);
        if (step % every == 0 || step + 1 == total) {
            std::cout << "step " << step + 1 << "/" << total << " loss=" << loss << "\n";
        }
    };
    return hooks;
}

int run(int argc, char** argv) {
    CLI::App app{"learned video-text retrieval engine (synthetic desk-scale pipeline)"};
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand("generate", "create a synthetic dataset directory");
    CommonOpts gen_opts;
    std::string gen_out;
    add_common(generate, gen_opts);
    generate->add_option("--out", gen_out, "output dataset directory")->required();

    // train
    auto* train = app.add_subcommand("train", "train the dual encoder and the reranker");
    CommonOpts train_opts;
    std::string train_dataset, train_out;
    bool train_no_temporal = false, train_no_rerank = false;
    add_common(train, train_opts);
    train->add_option("--dataset-dir", train_dataset, "dataset directory")->required();
    train->add_option("--out", train_out, "checkpoint output path")->required();
    train->add_flag("--no-temporal", train_no_temporal,
                    "replace the temporal encoder with mean pooling");
    train->add_flag("--no-rerank", train_no_rerank, "skip fitting the reranker head");

    // encode
    auto* encode = app.add_subcommand("encode", "embed all clips and captions");
    std::string enc_dataset, enc_checkpoint, enc_out;
    encode->add_option("--dataset-dir", enc_dataset, "dataset directory")->required();
    encode->add_option("--checkpoint", enc_checkpoint, "model checkpoint")->required();
    encode->add_option("--out", enc_out, "output directory for videos.bin/texts.bin")
        ->required();

    // retrieve
    auto* retrieve = app.add_subcommand("retrieve", "stage-1 cosine retrieval lists");
    std::string ret_dataset, ret_checkpoint, ret_out, ret_direction = "t2v";
    std::uint64_t ret_k = 0;
    retrieve->add_option("--dataset-dir", ret_dataset, "dataset directory")->required();
    retrieve->add_option("--checkpoint", ret_checkpoint, "model checkpoint")->required();
    retrieve->add_option("--out", ret_out, "ranked list output file")->required();
    retrieve->add_option("--k", ret_k, "list length (default: rerank.k)");
    retrieve->add_option("--direction", ret_direction, "t2v or v2t")
        ->check(CLI::IsMember({"t2v", "v2t"}));

    // rerank
    auto* rerank_cmd = app.add_subcommand("rerank", "two-stage reranked retrieval lists");
    CommonOpts rerank_opts;
    std::string rr_dataset, rr_checkpoint, rr_out, rr_direction = "t2v";
    std::uint64_t rr_k = 0;
    double rr_alpha = -1.0;
    add_common(rerank_cmd, rerank_opts);
    rerank_cmd->add_option("--dataset-dir", rr_dataset, "dataset directory")->required();
    rerank_cmd->add_option("--checkpoint", rr_checkpoint, "model checkpoint")->required();
    rerank_cmd->add_option("--out", rr_out, "ranked list output file")->required();
    rerank_cmd->add_option("--k", rr_k, "candidates per query");
    rerank_cmd->add_option("--alpha", rr_alpha, "fusion residual weight");
    rerank_cmd->add_option("--direction", rr_direction, "t2v or v2t")
        ->check(CLI::IsMember({"t2v", "v2t"}));

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate mAP and nDCG in both directions");
    CommonOpts eval_opts;
    std::string ev_dataset, ev_checkpoint, ev_out, ev_format = "text";
    std::uint64_t ev_k = 0;
    double ev_alpha = -1.0;
    bool ev_no_rerank = false, ev_no_temporal = false;
    add_common(eval_cmd, eval_opts);
    eval_cmd->add_option("--dataset-dir", ev_dataset, "dataset directory")->required();
    eval_cmd->add_option("--checkpoint", ev_checkpoint, "model checkpoint")->required();
    eval_cmd->add_option("--out", ev_out, "also write the report to this file");
    eval_cmd->add_option("--k", ev_k, "rerank candidates per query");
    eval_cmd->add_option("--alpha", ev_alpha, "fusion residual weight");
    eval_cmd->add_flag("--no-rerank", ev_no_rerank, "score with the raw cosine matrix");
    eval_cmd->add_flag("--no-temporal", ev_no_temporal, "force mean-pooled clip embeddings");
    eval_cmd->add_option("--report-format", ev_format, "text or records")
        ->check(CLI::IsMember({"text", "records"}));

    // ablate
    auto* ablate = app.add_subcommand("ablate", "train/evaluate the four component ablations");
    CommonOpts abl_opts;
    std::string abl_dataset, abl_out, abl_format = "text";
    add_common(ablate, abl_opts);
    ablate->add_option("--dataset-dir", abl_dataset, "dataset directory")->required();
    ablate->add_option("--out", abl_out, "also write the table to this file");
    ablate->add_option("--report-format", abl_format, "text or records")
        ->check(CLI::IsMember({"text", "records"}));

    CLI11_PARSE(app, argc, argv);

    if (generate->parsed()) {
        const RunConfig config = gen_opts.load();
        std::filesystem::create_directories(gen_out);
        const DatasetBundle bundle =
            generate_synthetic(SyntheticParams::from_config(config), config.seed);
        save_dataset(gen_out, bundle);
        std::cout << "wrote " << bundle.clip_count() << " clips / " << bundle.caption_count()
                  << " captions (" << bundle.params.n_classes << " classes) to " << gen_out
                  << "\n";
        return 0;
    }

    if (train->parsed()) {
        const RunConfig config = train_opts.load();
        const DatasetBundle bundle = load_dataset(train_dataset);
        TrainResult result = run_train(config, bundle, !train_no_temporal, !train_no_rerank,
                                       logging_hooks());
        save_checkpoint(train_out, result.params);
        std::cout << "checkpoint written to " << train_out << "\n";
        return 0;
    }

    if (encode->parsed()) {
        const DatasetBundle bundle = load_dataset(enc_dataset);
        const ModelParams params = load_checkpoint(enc_checkpoint);
        const EncodedDataset encoded = encode_dataset(params, bundle);
        std::filesystem::create_directories(enc_out);
        save_embeddings(enc_out + "/videos.bin", encoded.videos);
        save_embeddings(enc_out + "/texts.bin", encoded.texts);
        std::cout << "wrote " << encoded.videos.count() << " video and " << encoded.texts.count()
                  << " text embeddings to " << enc_out << "\n";
        return 0;
    }

    if (retrieve->parsed()) {
        const DatasetBundle bundle = load_dataset(ret_dataset);
        const ModelParams params = load_checkpoint(ret_checkpoint);
        const EncodedDataset encoded = encode_dataset(params, bundle);
        const ScoreMatrix s_t2v = similarity_matrix(encoded.videos, encoded.texts);
        const std::size_t k = ret_k ? ret_k : RunConfig{}.k;
        if (ret_direction == "t2v") {
            write_text_file(ret_out,
                            ranked_list_text(s_t2v, encoded.texts.ids, encoded.videos.ids, k));
        } else {
            write_text_file(ret_out, ranked_list_text(transpose(s_t2v), encoded.videos.ids,
                                                      encoded.texts.ids, k));
        }
        std::cout << "wrote ranked lists to " << ret_out << "\n";
        return 0;
    }

    if (rerank_cmd->parsed()) {
        const RunConfig config = rerank_opts.load();
        const DatasetBundle bundle = load_dataset(rr_dataset);
        const ModelParams params = load_checkpoint(rr_checkpoint);
        const EncodedDataset encoded = encode_dataset(params, bundle);
        const ScoreMatrix s_t2v = similarity_matrix(encoded.videos, encoded.texts);
        const std::size_t k = rr_k ? rr_k : config.k;
        const double alpha = rr_alpha >= 0.0 ? rr_alpha : config.alpha;
        if (rr_direction == "t2v") {
            const ScoreMatrix fused = rerank(s_t2v, encoded.videos, encoded.texts, params.cross,
                                             k, alpha, RerankDirection::TextToVideo);
            write_text_file(rr_out,
                            ranked_list_text(fused, encoded.texts.ids, encoded.videos.ids, k));
        } else {
            const ScoreMatrix fused =
                rerank(transpose(s_t2v), encoded.videos, encoded.texts, params.cross, k, alpha,
                       RerankDirection::VideoToText);
            write_text_file(rr_out,
                            ranked_list_text(fused, encoded.videos.ids, encoded.texts.ids, k));
        }
        std::cout << "wrote reranked lists to " << rr_out << "\n";
        return 0;
    }

    if (eval_cmd->parsed()) {
        const RunConfig config = eval_opts.load();
        const DatasetBundle bundle = load_dataset(ev_dataset);
        ModelParams params = load_checkpoint(ev_checkpoint);
        if (ev_no_temporal) params.dims.temporal_enabled = false;
        EvalOptions options = EvalOptions::from_config(config, !ev_no_rerank);
        if (ev_k) options.k = ev_k;
        if (ev_alpha >= 0.0) options.alpha = ev_alpha;
        const EvalResult result = run_eval(params, bundle, options);
        const std::string rendered = ev_format == "records" ? report_records(result.report)
                                                            : report_text(result.report);
        std::cout << rendered;
        if (!ev_out.empty()) write_text_file(ev_out, rendered);
        return 0;
    }

    if (ablate->parsed()) {
        const RunConfig config = abl_opts.load();
        const DatasetBundle bundle = load_dataset(abl_dataset);
        const std::vector<AblationRow> rows = run_ablation(config, bundle);
        const std::string rendered =
            abl_format == "records" ? ablation_table_records(rows) : ablation_table_text(rows);
        std::cout << rendered;
        if (!abl_out.empty()) write_text_file(abl_out, rendered);
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << "\n";
        return 3;
    } catch (const CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return 4;
    } catch (const DegenerateMaskError& e) {
        std::cerr << "degenerate mask: " << e.what() << "\n";
        return 5;
    } catch (const DegenerateRowError& e) {
        std::cerr << "degenerate row: " << e.what() << "\n";
        return 5;
    } catch (const NormalizationError& e) {
        std::cerr << "normalization error: " << e.what() << "\n";
        return 6;
    } catch (const BadMagicError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 7;
    } catch (const VersionMismatchError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 8;
    } catch (const TruncatedFileError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 9;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 7;
    } catch (const UndefinedMetricError& e) {
        std::cerr << "metric error: " << e.what() << "\n";
        return 10;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 11;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 12;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>

#include "tempret/synthetic.hpp"
#include "tempret/temporal_encoder.hpp"
#include "test_helpers.hpp"

using namespace tempret;
using namespace tempret::testing;

namespace {

SyntheticParams small_params() {
    SyntheticParams p;
    p.n_clips = 48;
    p.n_captions = 48;
    p.frames = 8;
    p.min_frames = 8;
    p.d_in_video = 16;
    p.d_in_text = 12;
    p.n_classes = 8;
    p.noise = 0.01;
    return p;
}

std::string temp_dir() {
    static int counter = 0;
    const std::string dir =
        (std::filesystem::temp_directory_path() / ("tempret_syn_" + std::to_string(counter++)))
            .string();
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace


TEST_CASE("same seed produces identical bundles, different seeds differ", "[synthetic]") {
    const SyntheticParams params = small_params();
    DatasetBundle a = generate_synthetic(params, 99);
    DatasetBundle b = generate_synthetic(params, 99);
    CHECK(a.frames == b.frames);
    CHECK(a.texts == b.texts);
    CHECK(a.relevance == b.relevance);
    CHECK(a.clip_frames == b.clip_frames);

    DatasetBundle c = generate_synthetic(params, 100);
    CHECK_FALSE(a.frames == c.frames);
}

TEST_CASE("relevance diagonal is 1 and grades follow positional overlap", "[synthetic]") {
    DatasetBundle bundle = generate_synthetic(small_params(), 7);
    const std::size_t n = bundle.caption_count();
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(bundle.relevance(i, i) == 1.0);
        CHECK(bundle.caption_class[i] == bundle.clip_class[i]);
    }
    for (double v : bundle.relevance.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    // role 0 vs role 1 share all steps but no positions: relevance 0
    // role 0 vs role 2 agree on frames-2 positions: 0.5 * (T-2)/T
    const double partial = 0.5 * 6.0 / 8.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t ca = bundle.caption_class[i];
            const std::size_t cb = bundle.clip_class[j];
            if (ca == cb) continue;
            const double r = bundle.relevance(i, j);
            if (bundle.class_group[ca] != bundle.class_group[cb]) {
                CHECK(r == 0.0);
            } else if ((bundle.class_role[ca] == 0 && bundle.class_role[cb] == 1) ||
                       (bundle.class_role[ca] == 1 && bundle.class_role[cb] == 0)) {
                CHECK(r == 0.0);
            } else if ((bundle.class_role[ca] == 0 && bundle.class_role[cb] == 2) ||
                       (bundle.class_role[ca] == 2 && bundle.class_role[cb] == 0)) {
                CHECK(r == Approx(partial).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("rotated-order twins pool to nearly identical features", "[synthetic]") {
    SyntheticParams params = small_params();
    params.noise = 0.002;
    DatasetBundle bundle = generate_synthetic(params, 21);

    // find one clip of role 0 and one of role 1 in the same group
    std::size_t base_clip = 0, twin_clip = 0;
    bool found = false;
    for (std::size_t i = 0; i < bundle.clip_count() && !found; ++i) {
        if (bundle.class_role[bundle.clip_class[i]] != 0) continue;
        for (std::size_t j = 0; j < bundle.clip_count(); ++j) {
            if (bundle.class_role[bundle.clip_class[j]] == 1 &&
                bundle.class_group[bundle.clip_class[j]] ==
                    bundle.class_group[bundle.clip_class[i]]) {
                base_clip = i;
                twin_clip = j;
                found = true;
                break;
            }
        }
    }
    REQUIRE(found);

    FrameSequence a = bundle.clip_sequence(base_clip);
    FrameSequence b = bundle.clip_sequence(twin_clip);
    const std::vector<double> pa = masked_mean_pool(a.features, a.mask);
    const std::vector<double> pb = masked_mean_pool(b.features, b.mask);
    CHECK(cosine_of(pa, pb) > 0.999);  // order is the only difference

    // but the frame sequences themselves differ clearly
    CHECK(max_abs_diff(a.features, b.features) > 0.1);
}

TEST_CASE("min_frames below frames produces masked padding rows", "[synthetic]") {
    SyntheticParams params = small_params();
    params.min_frames = 5;
    DatasetBundle bundle = generate_synthetic(params, 3);
    bool saw_short = false;
    for (std::size_t i = 0; i < bundle.clip_count(); ++i) {
        const std::size_t valid = bundle.clip_frames[i];
        CHECK(valid >= 5);
        CHECK(valid <= 8);
        saw_short = saw_short || valid < 8;
        for (std::size_t f = valid; f < 8; ++f) {
            for (std::size_t d = 0; d < params.d_in_video; ++d) {
                CHECK(bundle.frames(i * 8 + f, d) == 0.0);
            }
        }
        FrameSequence seq = bundle.clip_sequence(i);
        CHECK(count_valid(seq.mask) == valid);
    }
    CHECK(saw_short);
}

TEST_CASE("dataset directory round-trip reproduces the bundle", "[synthetic]") {
    const SyntheticParams params = small_params();
    DatasetBundle bundle = generate_synthetic(params, 17);
    const std::string dir = temp_dir();
    save_dataset(dir, bundle);
    DatasetBundle loaded = load_dataset(dir);

    CHECK(loaded.frames == bundle.frames);
    CHECK(loaded.texts == bundle.texts);
    CHECK(loaded.relevance == bundle.relevance);
    CHECK(loaded.clip_ids == bundle.clip_ids);
    CHECK(loaded.caption_ids == bundle.caption_ids);
    CHECK(loaded.clip_class == bundle.clip_class);
    CHECK(loaded.caption_class == bundle.caption_class);
    CHECK(loaded.clip_frames == bundle.clip_frames);
    CHECK(loaded.class_group == bundle.class_group);
    CHECK(loaded.class_role == bundle.class_role);
    CHECK(loaded.seed == bundle.seed);

    // saving the loaded bundle again is byte-identical
    const std::string dir2 = temp_dir();
    save_dataset(dir2, loaded);
    for (const char* name : {"/meta.txt", "/frames.bin", "/texts.bin", "/relevance.bin",
                             "/clips.txt", "/captions.txt", "/classes.txt"}) {
        CHECK(slurp(dir + name) == slurp(dir2 + name));
    }
}

TEST_CASE("generator rejects invalid parameter combinations", "[synthetic]") {
    SyntheticParams p = small_params();
    p.n_captions = 10;
    CHECK_THROWS_AS(generate_synthetic(p, 1), ConfigError);
    p = small_params();
    p.n_classes = 6;  // not a multiple of 4
    CHECK_THROWS_AS(generate_synthetic(p, 1), ConfigError);
    p = small_params();
    p.frames = 3;
    p.min_frames = 3;
    CHECK_THROWS_AS(generate_synthetic(p, 1), ConfigError);
}


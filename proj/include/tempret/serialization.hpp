// On-disk formats.
//
// Embedding container ("TRETEMB1") and relevance container ("TRETREL1"):
//   8-byte magic, u32 LE version (currently 1), u64 LE row count, u64 LE
//   column count, then row-major f32 LE payload. Embedding files carry a
//   human-readable sidecar manifest at <path>.manifest with one
//   "<row-index> TAB <id>" line per row.
//
// Checkpoint ("TRETCKP1"):
//   8-byte magic, u32 LE version, a fixed dims block, then a count of named
//   tensors, each as u32 LE name length + name bytes + u64 LE rows + u64 LE
//   cols + row-major f64 LE payload. Doubles keep parameter round-trips
//   bit-exact.
//
// Every reader distinguishes three failure classes: wrong magic, wrong
// version, and truncation.

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "tempret/errors.hpp"
#include "tempret/matrix.hpp"
#include "tempret/retrieval_space.hpp"

namespace tempret {

constexpr char kEmbeddingMagic[9] = "TRETEMB1";
constexpr char kRelevanceMagic[9] = "TRETREL1";
constexpr char kCheckpointMagic[9] = "TRETCKP1";
constexpr std::uint32_t kFormatVersion = 1;

namespace detail {

inline void write_bytes(std::ostream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw IoError("write failed");
}

inline void write_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    write_bytes(out, b, 4);
}

inline void write_u64_le(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    write_bytes(out, b, 8);
}

inline void write_f32_le(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32_le(out, bits);
}

inline void write_f64_le(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64_le(out, bits);
}

inline bool read_bytes(std::istream& in, void* data, std::size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount()) == n;
}

inline std::uint32_t read_u32_le(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!read_bytes(in, b, 4)) {
        throw TruncatedFileError(path + ": truncated (expected 4 more bytes)");
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t read_u64_le(std::istream& in, const std::string& path) {
    unsigned char b[8];
    if (!read_bytes(in, b, 8)) {
        throw TruncatedFileError(path + ": truncated (expected 8 more bytes)");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void check_header(std::istream& in, const std::string& path, const char* magic) {
    char got[8];
    if (!read_bytes(in, got, 8)) {
        throw TruncatedFileError(path + ": too short for a magic header");
    }
    if (std::memcmp(got, magic, 8) != 0) {
        throw BadMagicError(path + ": bad magic, expected \"" + std::string(magic, 8) + "\"");
    }
    const std::uint32_t version = read_u32_le(in, path);
    if (version != kFormatVersion) {
        throw VersionMismatchError(path + ": unsupported version " + std::to_string(version) +
                                   " (supported: " + std::to_string(kFormatVersion) + ")");
    }
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    return in;
}

inline void save_f32_matrix(const std::string& path, const Matrix& m, const char* magic) {
    std::ofstream out = open_out(path);
    write_bytes(out, magic, 8);
    write_u32_le(out, kFormatVersion);
    write_u64_le(out, m.rows());
    write_u64_le(out, m.cols());
    for (double v : m.data()) write_f32_le(out, static_cast<float>(v));
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

inline Matrix load_f32_matrix(const std::string& path, const char* magic) {
    std::ifstream in = open_in(path);
    check_header(in, path, magic);
    const std::uint64_t rows = read_u64_le(in, path);
    const std::uint64_t cols = read_u64_le(in, path);
    Matrix m(rows, cols);
    std::vector<unsigned char> buf(static_cast<std::size_t>(cols) * 4);
    for (std::uint64_t r = 0; r < rows; ++r) {
        if (!read_bytes(in, buf.data(), buf.size())) {
            throw TruncatedFileError(path + ": truncated inside row " + std::to_string(r));
        }
        for (std::uint64_t c = 0; c < cols; ++c) {
            std::uint32_t bits = 0;
            for (int i = 0; i < 4; ++i) {
                bits |= static_cast<std::uint32_t>(buf[c * 4 + i]) << (8 * i);
            }
            float f;
            std::memcpy(&f, &bits, 4);
            m(r, c) = static_cast<double>(f);
        }
    }
    return m;
}

} // namespace detail

// ---------------------------------------------------------------------------
// embeddings
// ---------------------------------------------------------------------------

inline std::string manifest_path(const std::string& path) {
    return path + ".manifest";
}

inline void save_embeddings(const std::string& path, const EmbeddingMatrix& emb) {
    emb.validate();
    detail::save_f32_matrix(path, emb.data, kEmbeddingMagic);
    std::ofstream manifest(manifest_path(path), std::ios::trunc);
    if (!manifest) throw IoError("cannot open for writing: " + manifest_path(path));
    for (std::size_t i = 0; i < emb.ids.size(); ++i) {
        manifest << i << '\t' << emb.ids[i] << '\n';
    }
    manifest.flush();
    if (!manifest) throw IoError("write failed: " + manifest_path(path));
}

inline EmbeddingMatrix load_embeddings(const std::string& path) {
    EmbeddingMatrix emb;
    emb.data = detail::load_f32_matrix(path, kEmbeddingMagic);
    std::ifstream manifest(manifest_path(path));
    if (!manifest) throw IoError("cannot open for reading: " + manifest_path(path));
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw FormatError(manifest_path(path) + ": malformed line '" + line + "'");
        }
        emb.ids.push_back(line.substr(tab + 1));
    }
    if (emb.ids.size() != emb.data.rows()) {
        throw FormatError(manifest_path(path) + ": " + std::to_string(emb.ids.size()) +
                          " ids for " + std::to_string(emb.data.rows()) + " rows");
    }
    emb.validate();
    return emb;
}

// ---------------------------------------------------------------------------
// relevance matrices
// ---------------------------------------------------------------------------

inline void save_relevance(const std::string& path, const RelevanceMatrix& r) {
    detail::save_f32_matrix(path, r, kRelevanceMagic);
}

inline RelevanceMatrix load_relevance(const std::string& path) {
    return detail::load_f32_matrix(path, kRelevanceMagic);
}

// ---------------------------------------------------------------------------
// named f64 tensor files (checkpoints)
// ---------------------------------------------------------------------------

struct NamedTensor {
    std::string name;
    Matrix value;
};

struct CheckpointDims {
    std::uint32_t layers = 0;
    std::uint32_t dim = 0;
    std::uint32_t heads = 0;
    std::uint32_t t_max = 0;
    std::uint32_t d_in_video = 0;
    std::uint32_t d_in_text = 0;
    std::uint32_t cross_layers = 0;
    std::uint32_t temporal_enabled = 1;
    std::uint32_t gelu_kind = 0;  // 0 = tanh approximation, 1 = exact erf
};

inline void save_named_tensors(const std::string& path, const CheckpointDims& dims,
                               const std::vector<NamedTensor>& tensors) {
    std::ofstream out = detail::open_out(path);
    detail::write_bytes(out, kCheckpointMagic, 8);
    detail::write_u32_le(out, kFormatVersion);
    for (std::uint32_t v : {dims.layers, dims.dim, dims.heads, dims.t_max, dims.d_in_video,
                            dims.d_in_text, dims.cross_layers, dims.temporal_enabled,
                            dims.gelu_kind}) {
        detail::write_u32_le(out, v);
    }
    detail::write_u32_le(out, static_cast<std::uint32_t>(tensors.size()));
    for (const NamedTensor& t : tensors) {
        detail::write_u32_le(out, static_cast<std::uint32_t>(t.name.size()));
        detail::write_bytes(out, t.name.data(), t.name.size());
        detail::write_u64_le(out, t.value.rows());
        detail::write_u64_le(out, t.value.cols());
        for (double v : t.value.data()) detail::write_f64_le(out, v);
    }
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<NamedTensor> load_named_tensors(const std::string& path,
                                                   CheckpointDims& dims) {
    std::ifstream in = detail::open_in(path);
    detail::check_header(in, path, kCheckpointMagic);
    dims.layers = detail::read_u32_le(in, path);
    dims.dim = detail::read_u32_le(in, path);
    dims.heads = detail::read_u32_le(in, path);
    dims.t_max = detail::read_u32_le(in, path);
    dims.d_in_video = detail::read_u32_le(in, path);
    dims.d_in_text = detail::read_u32_le(in, path);
    dims.cross_layers = detail::read_u32_le(in, path);
    dims.temporal_enabled = detail::read_u32_le(in, path);
    dims.gelu_kind = detail::read_u32_le(in, path);
    const std::uint32_t count = detail::read_u32_le(in, path);
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        NamedTensor nt;
        const std::uint32_t name_len = detail::read_u32_le(in, path);
        nt.name.resize(name_len);
        if (!detail::read_bytes(in, nt.name.data(), name_len)) {
            throw TruncatedFileError(path + ": truncated tensor name");
        }
        const std::uint64_t rows = detail::read_u64_le(in, path);
        const std::uint64_t cols = detail::read_u64_le(in, path);
        nt.value = Matrix(rows, cols);
        for (std::size_t i = 0; i < nt.value.size(); ++i) {
            unsigned char b[8];
            if (!detail::read_bytes(in, b, 8)) {
                throw TruncatedFileError(path + ": truncated payload of tensor '" + nt.name +
                                         "'");
            }
            std::uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
            double d;
            std::memcpy(&d, &bits, 8);
            nt.value.data()[i] = d;
        }
        tensors.push_back(std::move(nt));
    }
    return tensors;
}

} // namespace tempret

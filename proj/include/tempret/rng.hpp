// Deterministic random number generation.
//
// std::mt19937 plus the standard distributions are not bit-stable across
// library implementations, and the pipeline promises byte-identical outputs
// per seed. So everything random in tempret goes through this fully
// specified generator: splitmix64 state advance, explicit uniform/gaussian
// transforms.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace tempret {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Next raw 64-bit value (splitmix64).
    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    /// Uniform integer in [0, n). Rejection-free modulo is fine here: n is
    /// always tiny relative to 2^64, the bias is far below any tolerance used.
    std::uint64_t uniform_index(std::uint64_t n) {
        return next_u64() % n;
    }

    /// Standard gaussian via Box-Muller (one value per call, no caching, so
    /// the stream layout stays trivially reproducible).
    double gauss() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double gauss(double mean, double stddev) {
        return mean + stddev * gauss();
    }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Derive an independent child generator (for per-phase streams).
    Rng fork() {
        return Rng(next_u64());
    }

private:
    std::uint64_t state_;
};

} // namespace tempret

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace shapcluster {

// Seedable, platform-stable PRNG shared by every module: xoshiro256** with
// splitmix64 state initialization. Streams are addressed by (seed, stream_id)
// so parallel components never consume from the same sequence. The raw 64-bit
// output sequence is part of the reproducibility contract and is pinned by a
// test vector.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed), stream_id_(stream_id) {
        std::uint64_t h = stream_id;
        std::uint64_t x = seed ^ splitmix_next(h); // stream id folded through one splitmix64 step
        state_[0] = splitmix_next(x);
        state_[1] = splitmix_next(x);
        state_[2] = splitmix_next(x);
        state_[3] = splitmix_next(x);
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0)
            state_[0] = 0x9E3779B97F4A7C15ULL;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, bound) by rejection sampling.
    std::uint64_t uniform_int(std::uint64_t bound) {
        const std::uint64_t limit = (0 - bound) % bound; // 2^64 mod bound
        std::uint64_t r;
        do {
            r = next();
        } while (r < limit);
        return r % bound;
    }

    // Standard normal via Box-Muller; consumes two uniforms per draw.
    double normal() {
        const double u1 = 1.0 - uniform(); // (0, 1], keeps the log finite
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    // Child stream with the same seed and a mixed stream id; used to hand
    // independent sequences to per-row / per-repeat work units.
    RngStream derive(std::uint64_t child_id) const {
        return RngStream(seed_, mix(stream_id_ * 0x9E3779B97F4A7C15ULL + child_id + 1));
    }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    static std::uint64_t splitmix_next(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        return mix(x);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t state_[4];
};

// Fixed per-stage stream ids; the pipeline derives every stage stream from the
// master seed through these constants so stages can be re-run in isolation.
namespace streams {
inline constexpr std::uint64_t sim_inputs = 1;
inline constexpr std::uint64_t sim_beta = 2;
inline constexpr std::uint64_t sim_labels = 3;
inline constexpr std::uint64_t train_split = 4;
inline constexpr std::uint64_t shap = 5;
inline constexpr std::uint64_t embed_raw = 6;
inline constexpr std::uint64_t embed_shap = 7;
inline constexpr std::uint64_t smoke_data = 8;
} // namespace streams

} // namespace shapcluster

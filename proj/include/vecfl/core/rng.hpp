#ifndef VECFL_CORE_RNG_HPP_
#define VECFL_CORE_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace vecfl {

// Deterministic 64-bit generator (splitmix64). We avoid <random>
// distributions on purpose: their output is implementation-defined and
// experiment outputs must be byte-identical across toolchains.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : state_(seed) {}

    // Independent substream addressed by a path of integers, e.g.
    // derive(seed, {kStage1, g, vehicle_id}). Streams with different
    // paths are decorrelated by the mixing function.
    static SeededRng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
        std::uint64_t s = mix(seed ^ 0x9e3779b97f4a7c15ull);
        for (std::uint64_t p : path) {
            s = mix(s ^ mix(p + 0x632be59bd9b4e019ull));
        }
        return SeededRng(s);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        // Rejection-free multiply-shift; bias is negligible for desk-scale n
        // but we keep the rejection loop so the draw is exact.
        std::uint64_t threshold = (0ull - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller; second value of the pair is cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        // Guard u1 = 0.
        double r = std::sqrt(-2.0 * std::log(u1 + 0x1.0p-53));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// Stream tags used when deriving substreams, so unrelated parts of the
// pipeline never share draws.
namespace stream {
inline constexpr std::uint64_t kMobility = 1;
inline constexpr std::uint64_t kStage1 = 2;
inline constexpr std::uint64_t kStage2 = 3;
inline constexpr std::uint64_t kBaseline = 4;
inline constexpr std::uint64_t kData = 5;
inline constexpr std::uint64_t kSgd = 6;
inline constexpr std::uint64_t kInstance = 7;
}  // namespace stream

}  // namespace vecfl

#endif  // VECFL_CORE_RNG_HPP_

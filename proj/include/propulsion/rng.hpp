#ifndef PROPULSION_RNG_HPP
#define PROPULSION_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace propulsion {

// Stream ids for the per-worker random streams. Keeping breeding separate
// from protocol randomness means exchange decisions never perturb the bred
// gene sequence.
enum class RngStream : std::uint64_t {
    Breeding = 1,
    Exchange = 2,
    Coordinator = 3,
    Evaluation = 4,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seedable random source with pinned distribution algorithms so that a given
// seed produces the same draw sequence on every build. The standard library
// distributions are implementation defined, which would break byte-identical
// reruns, so the few distributions needed are implemented here.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

    // Derives the stream for one worker from the run's root seed.
    static RandomSource for_worker(std::uint64_t root_seed, int global_id, RngStream stream) {
        std::uint64_t s = root_seed;
        splitmix64(s);
        s ^= 0x6a09e667f3bcc909ULL + static_cast<std::uint64_t>(global_id);
        splitmix64(s);
        s ^= static_cast<std::uint64_t>(stream) * 0x9e3779b97f4a7c15ULL;
        return RandomSource(splitmix64(s));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Uniform integer in [lo, hi], unbiased via rejection.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(next_u64());  // full 64-bit range
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % span);
    }

    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1));
    }

    // Bernoulli trial.
    bool chance(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller. Always consumes exactly two uniforms
    // and discards the paired deviate, so the draw count per call is fixed.
    double normal(double mean, double stddev) {
        double u1;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double z = r * std::cos(6.283185307179586476925286766559 * u2);
        return mean + stddev * z;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace propulsion

#endif

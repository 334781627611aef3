#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace deltavar {

/// Portable seeded generator. The engine is std::mt19937_64, whose output
/// sequence is fixed by the C++ standard; the distributions below are written
/// out explicitly because the std:: distributions are implementation defined.
///
///  - uniform01: (u >> 11) * 2^-53, i.e. the top 53 bits of one draw, in [0, 1)
///  - normal:    Box-Muller, z = sqrt(-2 ln(1 - u1)) cos(2 pi u2), one normal
///               per two draws (the sine branch is discarded)
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal(double mean = 0.0, double stddev = 1.0) {
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
        return mean + stddev * radius * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; derives independent stream seeds from (seed, index).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace deltavar

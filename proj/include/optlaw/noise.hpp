#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace optlaw {

// Deterministic standard-normal generator: mt19937_64 plus a fixed Box-Muller
// transform. std::normal_distribution is implementation-defined, so it is not
// used anywhere results must be byte-stable across rebuilds.
class GaussianNoise {
public:
    explicit GaussianNoise(std::uint64_t seed) : rng_(seed) {}

    double operator()() {
        // 53-bit uniforms, u1 in (0, 1] so log(u1) is finite
        double u1 = static_cast<double>((rng_() >> 11) + 1) * 0x1.0p-53;
        double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::mt19937_64 rng_;
};

}  // namespace optlaw

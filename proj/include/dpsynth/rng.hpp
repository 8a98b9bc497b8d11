#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "dpsynth/common.hpp"

namespace dpsynth {

// Seeded random stream. All noise primitives go through inverse-CDF or
// Box-Muller transforms of the engine's uniforms, so a fixed seed fixes
// every draw. Named substreams let pipeline stages own independent streams
// derived from one root seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    // Substream for a named stage: hash of the label mixed with the seed this
    // stream was constructed from (not the evolving engine state).
    Rng substream(const std::string& label) const {
        return Rng(fnv1a(label, seed_ ^ 0x9e3779b97f4a7c15ULL));
    }

    std::uint64_t seed() const { return seed_; }

    // Uniform in [0, 1): 53-bit mantissa from the engine output.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform in (0, 1), safe for logs.
    double uniform_open() {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return u;
    }

    // Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller.
    double normal() {
        const double u1 = uniform_open();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double sigma) { return sigma * normal(); }

    // Laplace(0, b) via inverse CDF.
    double laplace(double b) {
        if (b == 0.0) return 0.0;
        const double u = uniform_open() - 0.5;
        return -b * std::copysign(std::log(1.0 - 2.0 * std::fabs(u)), u);
    }

    // Gumbel(0, b) via inverse CDF: -b ln(-ln U).
    double gumbel(double b) {
        if (b == 0.0) return 0.0;
        return -b * std::log(-std::log(uniform_open()));
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace dpsynth

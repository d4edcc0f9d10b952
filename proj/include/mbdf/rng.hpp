#pragma once
// Reproducible per-trial random streams. A stream is a pure function of
// (master seed, stream index): a SplitMix64 chain keyed on the pair seeds a
// mt19937_64 engine, so trial i draws the same values no matter which worker
// runs it or in what order. Normal variates use an explicit Box-Muller
// transform on 53-bit uniforms rather than std::normal_distribution, whose
// algorithm is implementation-defined.

#include <cstdint>
#include <random>
#include <utility>

#include "mbdf/linalg.hpp"

namespace mbdf {

class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_index);

    std::uint64_t u64() { return eng_(); }

    // Uniform on [0, 1) with 53 bits.
    double real01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }
    // Uniform on (0, 1]; safe as a log() argument.
    double real01_pos() { return static_cast<double>((u64() >> 11) + 1) * 0x1.0p-53; }

    // Pair of independent standard normals (Box-Muller).
    std::pair<double, double> normal_pair();

    bool bit();

private:
    std::mt19937_64 eng_;
    std::uint64_t bit_buf_ = 0;
    int bits_left_ = 0;
};

RngStream rng_for_trial(std::uint64_t master_seed, std::uint64_t trial_index);

// n i.i.d. circularly symmetric complex Gaussians with E|x|^2 = variance
// (each real and imaginary part has variance/2). variance must be > 0.
CVector complex_gaussian(std::size_t n, double variance, RngStream& rng);

}  // namespace mbdf

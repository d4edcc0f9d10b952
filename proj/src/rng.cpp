#include "mbdf/rng.hpp"

#include <cmath>
#include <numbers>

namespace mbdf {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_index) {
    std::uint64_t s = master_seed;
    std::uint64_t a = splitmix64(s);
    s ^= stream_index * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL;
    std::uint64_t seq[4];
    for (std::uint64_t& w : seq) w = splitmix64(s);
    std::seed_seq sseq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                       static_cast<std::uint32_t>(seq[0]), static_cast<std::uint32_t>(seq[0] >> 32),
                       static_cast<std::uint32_t>(seq[1]), static_cast<std::uint32_t>(seq[1] >> 32),
                       static_cast<std::uint32_t>(seq[2]), static_cast<std::uint32_t>(seq[2] >> 32),
                       static_cast<std::uint32_t>(seq[3]), static_cast<std::uint32_t>(seq[3] >> 32)};
    eng_.seed(sseq);
}

std::pair<double, double> RngStream::normal_pair() {
    const double u1 = real01_pos();
    const double u2 = real01();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    return {mag * std::cos(ang), mag * std::sin(ang)};
}

bool RngStream::bit() {
    if (bits_left_ == 0) {
        bit_buf_ = u64();
        bits_left_ = 64;
    }
    const bool b = (bit_buf_ & 1ULL) != 0;
    bit_buf_ >>= 1;
    --bits_left_;
    return b;
}

RngStream rng_for_trial(std::uint64_t master_seed, std::uint64_t trial_index) {
    return RngStream(master_seed, trial_index);
}

CVector complex_gaussian(std::size_t n, double variance, RngStream& rng) {
    if (!(variance > 0.0)) throw std::invalid_argument("complex_gaussian: variance must be > 0");
    const double scale = std::sqrt(variance / 2.0);
    CVector v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [re, im] = rng.normal_pair();
        v[i] = cplx(scale * re, scale * im);
    }
    return v;
}

}  // namespace mbdf

#pragma once
// Flat block-fading MIMO channel model: r = H s + n with H drawn once per
// packet, n circularly symmetric white Gaussian noise.

#include "mbdf/linalg.hpp"
#include "mbdf/rng.hpp"

namespace mbdf {

// n_rx x n_tx matrix with i.i.d. CN(0,1) entries, filled row by row.
CMatrix random_channel(std::size_t n_tx, std::size_t n_rx, RngStream& rng);

// r = H s + n, n ~ CN(0, sigma_n2 I). sigma_n2 = 0 gives the noise-free
// channel output; the noise shape is drawn at unit variance and scaled, so
// the same stream state yields the same noise direction at every SNR.
CVector transmit(const CMatrix& h, const CVector& s, double sigma_n2, RngStream& rng);

// SNR is defined as 10 log10(n_tx * sigma_s2 / sigma_n2); this inverts it.
double noise_variance_from_snr(double snr_db, std::size_t n_tx, double sigma_s2);

}  // namespace mbdf

#include "mbdf/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace mbdf {

CMatrix random_channel(std::size_t n_tx, std::size_t n_rx, RngStream& rng) {
    if (n_tx == 0 || n_rx < n_tx)
        throw std::invalid_argument("random_channel: need n_rx >= n_tx >= 1");
    CVector entries = complex_gaussian(n_rx * n_tx, 1.0, rng);
    return CMatrix(n_rx, n_tx, std::move(entries));
}

CVector transmit(const CMatrix& h, const CVector& s, double sigma_n2, RngStream& rng) {
    if (s.size() != h.cols()) throw std::invalid_argument("transmit: symbol vector does not match channel");
    if (!(sigma_n2 >= 0.0)) throw std::invalid_argument("transmit: negative noise variance");
    CVector r = matvec(h, s);
    CVector n = complex_gaussian(h.rows(), 1.0, rng);
    const double a = std::sqrt(sigma_n2);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += a * n[i];
    return r;
}

double noise_variance_from_snr(double snr_db, std::size_t n_tx, double sigma_s2) {
    if (n_tx == 0 || !(sigma_s2 > 0.0))
        throw std::invalid_argument("noise_variance_from_snr: need n_tx >= 1 and sigma_s2 > 0");
    return static_cast<double>(n_tx) * sigma_s2 / std::pow(10.0, snr_db / 10.0);
}

}  // namespace mbdf

#include "mbdf/modem.hpp"

#include <cmath>
#include <stdexcept>

namespace mbdf {

double Constellation::average_energy() const {
    double acc = 0.0;
    for (const cplx& a : points) acc += std::norm(a);
    return points.empty() ? 0.0 : acc / static_cast<double>(points.size());
}

const Constellation& qpsk() {
    static const Constellation c = [] {
        const double k = 1.0 / std::sqrt(2.0);
        Constellation q;
        q.name = "qpsk";
        q.points = {cplx(k, k), cplx(-k, k), cplx(-k, -k), cplx(k, -k)};
        q.labels = {{0, 0}, {0, 1}, {1, 1}, {1, 0}};
        q.bits_per_symbol = 2;
        return q;
    }();
    return c;
}

CVector modulate(const std::vector<std::uint8_t>& bits, const Constellation& c) {
    const std::size_t bps = c.bits_per_symbol;
    if (bps == 0 || bits.size() % bps != 0)
        throw std::invalid_argument("modulate: bit count is not a multiple of bits per symbol");
    CVector s(bits.size() / bps);
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::size_t match = c.points.size();
        for (std::size_t k = 0; k < c.points.size(); ++k) {
            bool eq = true;
            for (std::size_t b = 0; b < bps; ++b)
                if (c.labels[k][b] != bits[i * bps + b]) { eq = false; break; }
            if (eq) { match = k; break; }
        }
        if (match == c.points.size()) throw std::invalid_argument("modulate: bit pattern has no label");
        s[i] = c.points[match];
    }
    return s;
}

std::size_t slice_index(cplx z, const Constellation& c) {
    if (c.points.empty()) throw std::invalid_argument("slice_index: empty constellation");
    std::size_t best = 0;
    double best_d = std::norm(z - c.points[0]);
    for (std::size_t k = 1; k < c.points.size(); ++k) {
        const double d = std::norm(z - c.points[k]);
        if (d < best_d) { best_d = d; best = k; }
    }
    return best;
}

cplx slice(cplx z, const Constellation& c) { return c.points[slice_index(z, c)]; }

}  // namespace mbdf

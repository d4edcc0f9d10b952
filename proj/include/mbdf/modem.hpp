#pragma once
// Symbol mapping. Constellations carry their bit labels so detectors can be
// scored in bits, and are normalized to unit average symbol energy.

#include <cstdint>
#include <string>
#include <vector>

#include "mbdf/linalg.hpp"

namespace mbdf {

struct Constellation {
    std::string name;
    std::vector<cplx> points;
    std::vector<std::vector<std::uint8_t>> labels;  // labels[k] = bits of points[k]
    std::size_t bits_per_symbol = 0;

    // Average of |a_k|^2 over the alphabet.
    double average_energy() const;
};

// Gray-labeled QPSK: 00 -> (1+i)/sqrt(2), 01 -> (-1+i)/sqrt(2),
// 11 -> (-1-i)/sqrt(2), 10 -> (1-i)/sqrt(2).
const Constellation& qpsk();

// bits.size() must be a multiple of bits_per_symbol; consumes the bits in
// order, one label per symbol.
CVector modulate(const std::vector<std::uint8_t>& bits, const Constellation& c);

// Nearest constellation point by Euclidean distance; ties resolve to the
// lowest point index.
std::size_t slice_index(cplx z, const Constellation& c);
cplx slice(cplx z, const Constellation& c);

}  // namespace mbdf

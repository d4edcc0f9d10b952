#pragma once
// Monte Carlo BER engine: packet-level simulation over block-fading channels,
// a deterministic parallel sweep runner, and CSV persistence. Every packet is
// a pure function of (master seed, trial index), so results are bit-identical
// across worker counts and scheduling orders; timing capture is opt-in
// because measured durations would break that reproducibility.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mbdf/detectors.hpp"

namespace mbdf {

enum class DetectorKind { Linear, Osic, Sdf, Mbdf, MbdfMs, Ml };

// Stable wire names: linear, osic, sdf, mbdf, mbdf-ms, ml.
std::string detector_name(DetectorKind kind);
DetectorKind detector_from_name(const std::string& name);  // throws std::invalid_argument

struct SimConfig {
    std::size_t n_tx = 4;
    std::size_t n_rx = 4;
    std::vector<double> snr_db;
    std::vector<DetectorKind> detectors;
    std::size_t branches = 4;  // parallel branches for mbdf / mbdf-ms
    std::size_t stages = 1;    // refinement stages for mbdf-ms (1 = no refinement)
    double beta = 1.0;
    std::size_t packets = 10000;
    std::size_t packet_len = 200;  // symbol vectors per packet
    std::uint64_t seed = 42;
    SelectionMetric metric = SelectionMetric::Likelihood;
    std::string out_path;   // empty: no file written by run_sweep
    bool timing = false;    // record per-cell worker seconds (not reproducible)
    std::size_t workers = 0;  // 0: MBDF_WORKERS env var, else hardware threads

    void validate() const;  // throws std::invalid_argument
};

struct PacketCounts {
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;
    std::vector<std::uint64_t> stream_errors;  // per transmit stream
};

// Simulates one packet: channel draw, random bits, transmission at the given
// SNR, detection with the requested detector, bit-error count against the
// transmitted bits. Deterministic in (cfg.seed, trial_index); the packet data
// (channel, bits, noise directions) depends only on that pair, so every
// detector and SNR sees identical packets.
PacketCounts run_packet(const SimConfig& cfg, DetectorKind det, double snr_db,
                        std::uint64_t trial_index);

struct BerRecord {
    std::string detector;
    std::size_t branches = 0;  // 0 when not applicable to the detector
    std::size_t stages = 0;    // 0 when not applicable
    double snr_db = 0.0;
    std::uint64_t total_bits = 0;
    std::uint64_t bit_errors = 0;
    double ber = 0.0;
    double std_error = 0.0;     // binomial: sqrt(ber (1 - ber) / total_bits)
    double wall_seconds = 0.0;  // worker seconds spent on the cell; 0 unless timing
};

// Runs every (detector, SNR) cell over cfg.packets trials on a worker pool.
// Records come back in detector-list order, ascending SNR within a detector,
// and are also written to cfg.out_path when that is set. A cancel flag (e.g.
// set from a signal handler) stops the sweep at the next packet boundary;
// whatever counts completed are still aggregated, recorded, and flushed.
std::vector<BerRecord> run_sweep(const SimConfig& cfg,
                                 const std::atomic<bool>* cancel = nullptr);

// CSV with header detector,L,M,snr_db,total_bits,bit_errors,ber,stderr,
// wall_seconds; floats carry 10 significant digits.
std::string csv_string(const std::vector<BerRecord>& records);
void write_csv(const std::vector<BerRecord>& records, const std::string& path);

// "start:step:stop" (inclusive) or a comma-separated list of dB values.
std::vector<double> parse_snr_spec(const std::string& spec);

}  // namespace mbdf

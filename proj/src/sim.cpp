#include "mbdf/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "mbdf/channel.hpp"
#include "mbdf/rng.hpp"

namespace mbdf {

namespace {

constexpr double kSigmaS2 = 1.0;  // unit-power constellation

std::size_t saturated_factorial(std::size_t n) {
    const std::size_t cap = std::numeric_limits<std::size_t>::max();
    std::size_t f = 1;
    for (std::size_t k = 2; k <= n; ++k) {
        if (f > cap / k) return cap;
        f *= k;
    }
    return f;
}

std::size_t resolve_workers(const SimConfig& cfg) {
    if (cfg.workers > 0) return cfg.workers;
    if (const char* env = std::getenv("MBDF_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1)
            throw std::invalid_argument("MBDF_WORKERS must be a positive integer");
        return static_cast<std::size_t>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

void record_branch_columns(DetectorKind det, const SimConfig& cfg, BerRecord& rec) {
    switch (det) {
        case DetectorKind::Mbdf:
            rec.branches = cfg.branches;
            rec.stages = 1;
            break;
        case DetectorKind::MbdfMs:
            rec.branches = cfg.branches;
            rec.stages = cfg.stages;
            break;
        case DetectorKind::Sdf:
            rec.branches = 1;
            rec.stages = 1;
            break;
        default:
            rec.branches = 0;
            rec.stages = 0;
            break;
    }
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

double parse_one_double(const std::string& text) {
    const char* begin = text.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw std::invalid_argument("SNR spec: cannot parse '" + text + "'");
    while (*end == ' ' || *end == '\t') ++end;
    if (*end != '\0') throw std::invalid_argument("SNR spec: trailing junk in '" + text + "'");
    if (!std::isfinite(v)) throw std::invalid_argument("SNR spec: non-finite value");
    return v;
}

}  // namespace

std::string detector_name(DetectorKind kind) {
    switch (kind) {
        case DetectorKind::Linear: return "linear";
        case DetectorKind::Osic: return "osic";
        case DetectorKind::Sdf: return "sdf";
        case DetectorKind::Mbdf: return "mbdf";
        case DetectorKind::MbdfMs: return "mbdf-ms";
        case DetectorKind::Ml: return "ml";
    }
    throw std::invalid_argument("detector_name: unknown kind");
}

DetectorKind detector_from_name(const std::string& name) {
    if (name == "linear") return DetectorKind::Linear;
    if (name == "osic") return DetectorKind::Osic;
    if (name == "sdf") return DetectorKind::Sdf;
    if (name == "mbdf") return DetectorKind::Mbdf;
    if (name == "mbdf-ms") return DetectorKind::MbdfMs;
    if (name == "ml") return DetectorKind::Ml;
    throw std::invalid_argument("unknown detector '" + name +
                                "' (expected linear, osic, sdf, mbdf, mbdf-ms, or ml)");
}

void SimConfig::validate() const {
    if (n_tx == 0 || n_rx < n_tx)
        throw std::invalid_argument("config: need n_rx >= n_tx >= 1");
    if (snr_db.empty()) throw std::invalid_argument("config: SNR list is empty");
    if (detectors.empty()) throw std::invalid_argument("config: detector list is empty");
    if (packets == 0 || packet_len == 0)
        throw std::invalid_argument("config: packets and packet length must be >= 1");
    const std::size_t fact = saturated_factorial(n_tx);
    const std::size_t max_branches =
        fact == std::numeric_limits<std::size_t>::max() ? fact : fact + 1;
    if (branches == 0 || branches > max_branches)
        throw std::invalid_argument("config: branch count out of range");
    if (stages == 0) throw std::invalid_argument("config: stages must be >= 1");
    if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("config: beta must lie in [0, 1]");
}

PacketCounts run_packet(const SimConfig& cfg, DetectorKind det, double snr_db,
                        std::uint64_t trial_index) {
    const Constellation& c = qpsk();
    const std::size_t nt = cfg.n_tx, bps = c.bits_per_symbol;

    RngStream rng = rng_for_trial(cfg.seed, trial_index);
    const CMatrix h = random_channel(cfg.n_tx, cfg.n_rx, rng);
    const double sigma_n2 = noise_variance_from_snr(snr_db, nt, kSigmaS2);

    // The whole packet's bits are drawn before any noise so that the packet
    // content is a fixed function of the trial, whatever the SNR or detector.
    std::vector<std::uint8_t> bits(cfg.packet_len * nt * bps);
    for (std::uint8_t& b : bits) b = rng.bit() ? 1 : 0;
    const CVector symbols = modulate(bits, c);

    PacketCounts pc;
    pc.bits = bits.size();
    pc.stream_errors.assign(nt, 0);

    CVector s(nt), out;
    const auto run_all = [&](auto&& detect_fn) {
        for (std::size_t i = 0; i < cfg.packet_len; ++i) {
            std::copy(symbols.begin() + static_cast<std::ptrdiff_t>(i * nt),
                      symbols.begin() + static_cast<std::ptrdiff_t>((i + 1) * nt), s.begin());
            const CVector r = transmit(h, s, sigma_n2, rng);
            detect_fn(r, out);
            const std::uint8_t* tx = bits.data() + i * nt * bps;
            for (std::size_t j = 0; j < nt; ++j) {
                const std::vector<std::uint8_t>& lab = c.labels[slice_index(out[j], c)];
                for (std::size_t b = 0; b < bps; ++b) {
                    if (lab[b] != tx[j * bps + b]) {
                        ++pc.errors;
                        ++pc.stream_errors[j];
                    }
                }
            }
        }
    };

    switch (det) {
        case DetectorKind::Linear: {
            const LinearDetector d(h, kSigmaS2, sigma_n2, c);
            run_all([&](const CVector& r, CVector& o) { d.detect_into(r, o); });
            break;
        }
        case DetectorKind::Osic: {
            const OsicDetector d(h, kSigmaS2, sigma_n2, c);
            run_all([&](const CVector& r, CVector& o) { d.detect_into(r, o); });
            break;
        }
        case DetectorKind::Sdf: {
            const MbDfDetector d(h, kSigmaS2, sigma_n2, 1, 1, 1.0, c, cfg.metric);
            MbDfDetector::Workspace ws;
            run_all([&](const CVector& r, CVector& o) { d.detect_into(r, ws, o); });
            break;
        }
        case DetectorKind::Mbdf: {
            const MbDfDetector d(h, kSigmaS2, sigma_n2, cfg.branches, 1, cfg.beta, c, cfg.metric);
            MbDfDetector::Workspace ws;
            run_all([&](const CVector& r, CVector& o) { d.detect_into(r, ws, o); });
            break;
        }
        case DetectorKind::MbdfMs: {
            const MbDfDetector d(h, kSigmaS2, sigma_n2, cfg.branches, cfg.stages, cfg.beta, c,
                                 cfg.metric);
            MbDfDetector::Workspace ws;
            run_all([&](const CVector& r, CVector& o) { d.detect_into(r, ws, o); });
            break;
        }
        case DetectorKind::Ml: {
            const MlDetector d(h, c);
            run_all([&](const CVector& r, CVector& o) { d.detect_into(r, o); });
            break;
        }
    }
    return pc;
}

std::vector<BerRecord> run_sweep(const SimConfig& cfg, const std::atomic<bool>* cancel) {
    cfg.validate();

    struct Cell {
        DetectorKind det;
        double snr;
    };
    std::vector<Cell> cells;
    for (DetectorKind det : cfg.detectors) {
        std::vector<double> snrs = cfg.snr_db;
        std::sort(snrs.begin(), snrs.end());
        for (double snr : snrs) cells.push_back({det, snr});
    }

    struct Accum {
        std::atomic<std::uint64_t> bits{0};
        std::atomic<std::uint64_t> errors{0};
        std::atomic<std::uint64_t> wall_ns{0};
    };
    std::vector<Accum> acc(cells.size());

    struct Task {
        std::size_t cell;
        std::uint64_t begin;
        std::uint64_t end;
    };
    constexpr std::uint64_t kChunk = 64;
    std::vector<Task> tasks;
    for (std::size_t ci = 0; ci < cells.size(); ++ci)
        for (std::uint64_t t = 0; t < cfg.packets; t += kChunk)
            tasks.push_back({ci, t, std::min<std::uint64_t>(t + kChunk, cfg.packets)});

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    const auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) break;
            if (failed.load()) break;
            if (cancel && cancel->load()) break;
            const Task& task = tasks[i];
            std::uint64_t bits = 0, errors = 0;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                for (std::uint64_t t = task.begin; t < task.end; ++t) {
                    if (cancel && cancel->load()) break;
                    const PacketCounts pc =
                        run_packet(cfg, cells[task.cell].det, cells[task.cell].snr, t);
                    bits += pc.bits;
                    errors += pc.errors;
                }
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
            }
            acc[task.cell].bits += bits;
            acc[task.cell].errors += errors;
            if (cfg.timing) {
                const auto dt = std::chrono::steady_clock::now() - t0;
                acc[task.cell].wall_ns +=
                    static_cast<std::uint64_t>(
                        std::chrono::duration_cast<std::chrono::nanoseconds>(dt).count());
            }
            if (failed.load()) break;
        }
    };

    const std::size_t n_workers =
        std::max<std::size_t>(1, std::min(resolve_workers(cfg), tasks.size()));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    std::vector<BerRecord> records;
    records.reserve(cells.size());
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        BerRecord rec;
        rec.detector = detector_name(cells[ci].det);
        record_branch_columns(cells[ci].det, cfg, rec);
        rec.snr_db = cells[ci].snr;
        rec.total_bits = acc[ci].bits.load();
        rec.bit_errors = acc[ci].errors.load();
        rec.ber = rec.total_bits == 0
                      ? 0.0
                      : static_cast<double>(rec.bit_errors) / static_cast<double>(rec.total_bits);
        rec.std_error = rec.total_bits == 0
                            ? 0.0
                            : std::sqrt(rec.ber * (1.0 - rec.ber) /
                                        static_cast<double>(rec.total_bits));
        rec.wall_seconds = static_cast<double>(acc[ci].wall_ns.load()) * 1e-9;
        records.push_back(std::move(rec));
    }
    if (!cfg.out_path.empty()) write_csv(records, cfg.out_path);
    return records;
}

std::string csv_string(const std::vector<BerRecord>& records) {
    std::string out = "detector,L,M,snr_db,total_bits,bit_errors,ber,stderr,wall_seconds\n";
    for (const BerRecord& r : records) {
        out += r.detector;
        out += ',';
        out += std::to_string(r.branches);
        out += ',';
        out += std::to_string(r.stages);
        out += ',';
        out += format_double(r.snr_db);
        out += ',';
        out += std::to_string(r.total_bits);
        out += ',';
        out += std::to_string(r.bit_errors);
        out += ',';
        out += format_double(r.ber);
        out += ',';
        out += format_double(r.std_error);
        out += ',';
        out += format_double(r.wall_seconds);
        out += '\n';
    }
    return out;
}

void write_csv(const std::vector<BerRecord>& records, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << csv_string(records);
    f.flush();
    if (!f) throw std::runtime_error("failed while writing '" + path + "'");
}

std::vector<double> parse_snr_spec(const std::string& spec) {
    if (spec.empty()) throw std::invalid_argument("SNR spec: empty");
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        const std::size_t c1 = spec.find(':');
        const std::size_t c2 = spec.find(':', c1 + 1);
        if (c2 == std::string::npos || spec.find(':', c2 + 1) != std::string::npos)
            throw std::invalid_argument("SNR spec: expected start:step:stop");
        const double start = parse_one_double(spec.substr(0, c1));
        const double step = parse_one_double(spec.substr(c1 + 1, c2 - c1 - 1));
        const double stop = parse_one_double(spec.substr(c2 + 1));
        if (step == 0.0) throw std::invalid_argument("SNR spec: step must be nonzero");
        if ((stop - start) * step < 0.0)
            throw std::invalid_argument("SNR spec: step points away from stop");
        const std::size_t n =
            static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        for (std::size_t k = 0; k < n; ++k) out.push_back(start + static_cast<double>(k) * step);
    } else {
        std::size_t pos = 0;
        while (pos <= spec.size()) {
            const std::size_t comma = spec.find(',', pos);
            const std::string piece =
                spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            out.push_back(parse_one_double(piece));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    return out;
}

}  // namespace mbdf

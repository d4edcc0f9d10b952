#pragma once
// Detection algorithms over one channel realization: linear MMSE, ordered
// successive cancellation (V-BLAST style), single-branch decision feedback,
// the multi-branch MMSE decision-feedback detector with optional multistage
// refinement, and an exhaustive maximum-likelihood oracle. The class forms
// precompute everything that depends only on (H, noise level) so that one
// instance amortizes across a whole packet; the free functions are one-shot
// conveniences around them.

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mbdf/constraints.hpp"
#include "mbdf/filters.hpp"
#include "mbdf/linalg.hpp"
#include "mbdf/modem.hpp"

namespace mbdf {

// Raised when an exhaustive search space exceeds the supported bound.
class UnsupportedSizeError : public std::invalid_argument {
public:
    explicit UnsupportedSizeError(const std::string& what) : std::invalid_argument(what) {}
};

enum class SelectionMetric {
    Likelihood,  // per-vector residual ||r - H shat||^2 (default)
    SumMmse      // statistical per-branch sum of filter MMSE values
};

struct DetectionResult {
    CVector symbols;                  // final decisions, one per stream
    std::vector<CVector> candidates;  // per-branch candidates (single entry for
                                      // detectors without branches)
    std::size_t selected_branch = 0;  // index into candidates
    std::vector<double> metrics;      // selection metric per candidate
};

// n x n permutation with ones along the reverse diagonal; applying it to a
// detection ordering visits the streams in the opposite order. Involutory.
CMatrix reversal_matrix(std::size_t n);

// Smallest-residual candidate: returns (index of arg min ||r - H c||^2, all
// metric values). Ties resolve to the lowest index. Throws
// std::invalid_argument when candidates is empty.
std::pair<std::size_t, std::vector<double>> select_branch(const std::vector<CVector>& candidates,
                                                          const CMatrix& h, const CVector& r);

// Runs a single branch of a multi-branch detector: successive branches slice
// streams in plan order, feeding each decision back through that stream's
// constrained filter; parallel branches first form initial decisions with
// the unconstrained linear filters, then cancel all other streams at once.
CVector run_branch(const CMatrix& h, const CVector& r, const BranchPlan& plan,
                   const FilterBank& bank, const Constellation& c);

// Multi-branch MMSE decision-feedback detector. Construction builds the
// branch plans and the filter bank for one channel realization; detection
// runs every branch, optionally refines each branch's candidate over further
// stages (full feedback, direction alternating between stages), and keeps
// the candidate with the best selection metric.
class MbDfDetector {
public:
    MbDfDetector(const CMatrix& h, double sigma_s2, double sigma_n2, std::size_t branches,
                 std::size_t stages, double beta, const Constellation& c = qpsk(),
                 SelectionMetric metric = SelectionMetric::Likelihood);

    // Scratch for allocation-free detection; reusable across calls and
    // across detector instances of the same size. After detect_into it also
    // holds the per-branch candidates, metrics, and the selected index.
    struct Workspace {
        std::vector<CVector> candidates;
        std::vector<double> metrics;
        std::size_t selected = 0;
        CVector init;
    };

    void detect_into(const CVector& r, Workspace& ws, CVector& out) const;
    DetectionResult detect(const CVector& r) const;

    const std::vector<BranchPlan>& plans() const { return plans_; }
    const FilterBank& bank() const { return bank_; }
    std::size_t stages() const { return stages_; }

private:
    CMatrix h_;
    const Constellation* c_;
    SelectionMetric metric_;
    std::size_t stages_;
    std::vector<BranchPlan> plans_;
    FilterBank bank_;
    std::vector<FilterPair> refine_;  // full-feedback pair per stream (stages >= 2)
    std::size_t preselected_ = 0;     // SumMmse pick, known at construction
};

// Linear MMSE detector: slice w_j^H r with the unconstrained filters.
class LinearDetector {
public:
    LinearDetector(const CMatrix& h, double sigma_s2, double sigma_n2,
                   const Constellation& c = qpsk());
    void detect_into(const CVector& r, CVector& out) const;
    DetectionResult detect(const CVector& r) const;

private:
    CMatrix h_;
    const Constellation* c_;
    std::vector<CVector> w_;
};

// Classical ordered successive interference cancellation: V-BLAST ordering,
// MMSE nulling on the deflated channel, decision subtraction, repeat.
class OsicDetector {
public:
    OsicDetector(const CMatrix& h, double sigma_s2, double sigma_n2,
                 const Constellation& c = qpsk());
    void detect_into(const CVector& r, CVector& out) const;
    DetectionResult detect(const CVector& r) const;
    const std::vector<std::size_t>& ordering() const { return order_; }

private:
    CMatrix h_;
    const Constellation* c_;
    std::vector<std::size_t> order_;
    std::vector<CVector> w_;           // per step, for the stream order_[k]
    std::vector<CVector> h_cols_;      // cached channel columns
};

// Exact maximum likelihood by full enumeration of the transmit alphabet.
// Construction precomputes H s for every candidate vector; the alphabet size
// N^{N_T} is capped at 10^6.
class MlDetector {
public:
    MlDetector(const CMatrix& h, const Constellation& c = qpsk());
    void detect_into(const CVector& r, CVector& out) const;
    DetectionResult detect(const CVector& r) const;
    std::size_t candidate_count() const { return n_cand_; }

private:
    std::size_t nt_ = 0, nr_ = 0, n_cand_ = 0;
    const Constellation* c_;
    CMatrix h_;
    std::vector<cplx> hs_;              // candidate index major, n_rx entries each
    std::vector<std::size_t> sym_idx_;  // candidate index major, n_tx point indices
};

// One-shot conveniences (each builds the detector for this r and discards it).
DetectionResult detect_linear(const CMatrix& h, const CVector& r, double sigma_s2,
                              double sigma_n2, const Constellation& c = qpsk());
DetectionResult detect_osic_vblast(const CMatrix& h, const CVector& r, double sigma_s2,
                                   double sigma_n2, const Constellation& c = qpsk());
// Single-branch decision feedback: exactly the multi-branch detector with one
// branch and full feedback magnitude.
DetectionResult detect_sdf(const CMatrix& h, const CVector& r, double sigma_s2, double sigma_n2,
                           const Constellation& c = qpsk());
DetectionResult detect_mb_mmse_df(const CMatrix& h, const CVector& r, double sigma_s2,
                                  double sigma_n2, std::size_t branches, double beta,
                                  const Constellation& c = qpsk());
DetectionResult detect_multistage(const CMatrix& h, const CVector& r, double sigma_s2,
                                  double sigma_n2, std::size_t branches, std::size_t stages,
                                  double beta, const Constellation& c = qpsk());
DetectionResult detect_ml_exhaustive(const CMatrix& h, const CVector& r,
                                     const Constellation& c = qpsk());

}  // namespace mbdf

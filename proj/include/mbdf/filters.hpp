#pragma once
// Constrained MMSE filter design. Each (stream, branch) pair gets a
// feedforward filter w applied to the received vector and a feedback filter
// f applied to prior decisions; f is restricted to the branch's allowed taps
// by a shape projector and scaled by the magnitude factor beta. Two
// independent solvers are provided (a direct closed form and an alternating
// fixed point) plus a bank builder that shares the one expensive
// factorization across all pairs.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mbdf/constraints.hpp"
#include "mbdf/linalg.hpp"

namespace mbdf {

// Second-order statistics of the detection problem. Under perfect feedback
// (prior decisions equal to the transmitted symbols):
//   r_cov = sigma_s2 H H^H + sigma_n2 I     covariance of the received vector
//   q     = sigma_s2 H                      cross-covariance with decisions
//   p[j]  = sigma_s2 h_j                    cross-covariance with stream j
//   t[j]  = 0                               decision/symbol correlation
struct SecondOrderStats {
    CMatrix r_cov;            // n_rx x n_rx
    CMatrix q;                // n_rx x n_tx
    std::vector<CVector> p;   // p[j]: n_rx
    std::vector<CVector> t;   // t[j]: n_tx
    double sigma_s2 = 1.0;
};

SecondOrderStats perfect_feedback_stats(const CMatrix& h, double sigma_s2, double sigma_n2);

struct FilterPair {
    CVector w;                  // feedforward, n_rx
    CVector f;                  // feedback, n_tx
    double mmse = 0.0;          // analytic MSE attained by the pair
    double beta = 1.0;
    std::size_t stream = 0;
    std::size_t branch = 0;
    std::size_t iterations = 0; // fixed-point sweeps used; 0 for direct solves
};

class FilterConvergenceError : public std::runtime_error {
public:
    FilterConvergenceError(const std::string& what, FilterPair last)
        : std::runtime_error(what), last_(std::move(last)) {}
    // The iterate reached when the sweep budget ran out.
    const FilterPair& last_iterate() const { return last_; }

private:
    FilterPair last_;
};

// Direct solution of the coupled optimality conditions
//   w = r_cov^{-1} (p_j + q f)        and       f = beta proj (q^H w - t_j)
// obtained by eliminating f:
//   (r_cov - beta q proj q^H) w = p_j - beta q proj t_j.
// beta = 0 degenerates to the linear MMSE filter with f = 0.
FilterPair design_filters_closed_form(const SecondOrderStats& stats, const CMatrix& proj,
                                      double beta, std::size_t stream);

// Alternating solution of the same conditions specialized to perfect
// feedback, iterating
//   w <- (H H^H + (sigma_n2/sigma_s2) I)^{-1} H (delta_j + f)
//   f <- beta proj (sigma_s2 H^H w)
// from f = 0 until the w update moves less than tol (Euclidean norm) or the
// sweep budget is exhausted, in which case FilterConvergenceError carries the
// last iterate. The default budget is sized for the slow contraction at high
// SNR (the per-sweep contraction factor approaches 1 as sigma_n2 -> 0).
FilterPair design_filters_fixed_point(const CMatrix& h, const CMatrix& proj, double beta,
                                      std::size_t stream, double sigma_s2, double sigma_n2,
                                      double tol = 1e-10, std::size_t max_sweeps = 25000);

// Analytic MSE of a filter pair under the given statistics:
//   sigma_s2 - w^H r_cov w + f^H f.
// Exact whenever w satisfies its optimality condition for this f.
double mmse_value(const CVector& w, const CVector& f, const SecondOrderStats& stats);

// All filter pairs for a branch-plan set, pairs[l][k] being the pair for the
// stream detected at step k of branch l. linear_w[j] is the unconstrained
// (beta = 0) filter for stream j, used both by the linear detector and to
// form initial decisions for parallel-cancellation branches.
struct FilterBank {
    std::vector<std::vector<FilterPair>> pairs;
    std::vector<CVector> linear_w;
    std::vector<double> branch_mmse_sum;  // per branch, over its streams
};

// Builds every pair with a single n_rx-sized factorization: with
// A = H H^H + (sigma_n2/sigma_s2) I factored once, X = A^{-1} H and
// C = sigma_s2 H^H X reduce each pair to a system of the size of its allowed
// tap set, solved on the restricted coordinates:
//   (I - beta C_DD) f_D = beta C_{D,j},      w = X (delta_j + f).
// This is algebraically the same solution as design_filters_closed_form.
FilterBank build_filter_bank(const CMatrix& h, const std::vector<BranchPlan>& plans,
                             double sigma_s2, double sigma_n2);

}  // namespace mbdf

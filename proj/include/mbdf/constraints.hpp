#pragma once
// Feedback shape constraints and per-branch detection plans. A shape
// constraint pins part of a feedback filter to zero (S f = 0), which is how a
// branch expresses "only streams decided before this one may be cancelled".
// A branch plan bundles one detection ordering with the per-step constraints
// and the feedback magnitude factor.

#include <cstddef>
#include <vector>

#include "mbdf/linalg.hpp"

namespace mbdf {

// Linear restriction S f = v on a feedback filter, with the orthogonal
// projector onto its solution set cached. The offset v is identically zero
// in every constraint this module produces; it is kept as a field so a
// constraint instance is self-describing.
struct ShapeConstraint {
    CMatrix s;     // n_tx x n_tx 0/1 selection matrix
    CVector v;     // constraint offset, always the zero vector here
    CMatrix proj;  // projector onto { f : S f = 0 }, so s * proj = 0
};

enum class BranchKind { Sic, Pic };

// One parallel detection branch. ordering[k] is the (0-based) stream decided
// at step k; stream_shape[k] constrains that stream's feedback filter.
struct BranchPlan {
    std::size_t index = 0;
    BranchKind kind = BranchKind::Sic;
    std::vector<std::size_t> ordering;
    std::vector<ShapeConstraint> stream_shape;
    double beta = 1.0;
};

// Successive-cancellation shape for the canonical (natural-order) branch:
// the stream decided after `n_detected` others may tap exactly the first
// n_detected coordinates. S carries an n_detected x n_detected zero block
// upper-left and an identity block lower-right. Requires
// n_detected < n_tx.
ShapeConstraint sic_shape(std::size_t n_tx, std::size_t n_detected);

// Successive-cancellation shape for an arbitrary detection ordering: the
// stream decided at step n_detected may tap exactly the streams
// ordering[0..n_detected-1]. Realized as the canonical S with its columns
// permuted by the ordering. ordering must be a permutation of 0..n_tx-1.
ShapeConstraint permuted_sic_shape(std::size_t n_tx, std::size_t n_detected,
                                   const std::vector<std::size_t>& ordering);

// Parallel-cancellation shape for stream j: feedback may tap every stream
// except j itself, so S = diag(e_j) and the projector zeroes tap j only.
ShapeConstraint pic_shape(std::size_t n_tx, std::size_t stream);

// Greedy detection ordering: at each step, among the still-undecided
// streams, pick the one whose MMSE is smallest given perfect cancellation of
// the streams already ordered (the deflated-channel criterion used by
// V-BLAST receivers). Ties resolve to the lowest stream index.
std::vector<std::size_t> vblast_ordering(const CMatrix& h, double sigma_s2, double sigma_n2);

// The branch set for an L-branch detector:
//   branch 0          successive cancellation in vblast_ordering(h)
//   branches 1..L-2   successive cancellation with the branch-0 ordering
//                     cyclically left-shifted by 1, 2, ...; once the n_tx
//                     distinct shifts are exhausted, the remaining orderings
//                     are filled in lexicographic order, skipping any already
//                     present
//   branch L-1        parallel cancellation in natural order (only if L >= 2)
// L must lie in [1, n_tx! + 1]; L = n_tx! + 1 yields every ordering plus the
// parallel branch. The same beta is applied to every branch.
std::vector<BranchPlan> build_branch_plans(std::size_t n_tx, std::size_t branches,
                                           const CMatrix& h, double sigma_s2,
                                           double sigma_n2, double beta);

}  // namespace mbdf

#include "mbdf/constraints.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace mbdf {

namespace {

ShapeConstraint finish(CMatrix s) {
    ShapeConstraint sc;
    sc.proj = projection_from_shape(s);
    sc.s = std::move(s);
    sc.v = CVector(sc.s.cols(), cplx(0.0, 0.0));
    return sc;
}

void check_ordering(std::size_t n_tx, const std::vector<std::size_t>& ordering) {
    if (ordering.size() != n_tx) throw std::invalid_argument("ordering has wrong length");
    std::vector<bool> seen(n_tx, false);
    for (std::size_t j : ordering) {
        if (j >= n_tx || seen[j]) throw std::invalid_argument("ordering is not a permutation");
        seen[j] = true;
    }
}

// n_tx! saturated so the branch-count bound never overflows.
std::size_t saturated_factorial(std::size_t n) {
    const std::size_t cap = std::numeric_limits<std::size_t>::max();
    std::size_t f = 1;
    for (std::size_t k = 2; k <= n; ++k) {
        if (f > cap / k) return cap;
        f *= k;
    }
    return f;
}

}  // namespace

ShapeConstraint sic_shape(std::size_t n_tx, std::size_t n_detected) {
    if (n_tx == 0 || n_detected >= n_tx)
        throw std::invalid_argument("sic_shape: need n_detected < n_tx");
    CMatrix s(n_tx, n_tx);
    for (std::size_t k = n_detected; k < n_tx; ++k) s(k, k) = 1.0;
    return finish(std::move(s));
}

ShapeConstraint permuted_sic_shape(std::size_t n_tx, std::size_t n_detected,
                                   const std::vector<std::size_t>& ordering) {
    if (n_tx == 0 || n_detected >= n_tx)
        throw std::invalid_argument("permuted_sic_shape: need n_detected < n_tx");
    check_ordering(n_tx, ordering);
    // Canonical S times the column-permutation matrix P with P(k, ordering[k]) = 1:
    // row k of the product is e_{ordering[k]} when step k is still undecided.
    CMatrix s(n_tx, n_tx);
    for (std::size_t k = n_detected; k < n_tx; ++k) s(k, ordering[k]) = 1.0;
    return finish(std::move(s));
}

ShapeConstraint pic_shape(std::size_t n_tx, std::size_t stream) {
    if (stream >= n_tx) throw std::invalid_argument("pic_shape: stream out of range");
    CMatrix s(n_tx, n_tx);
    s(stream, stream) = 1.0;
    return finish(std::move(s));
}

std::vector<std::size_t> vblast_ordering(const CMatrix& h, double sigma_s2, double sigma_n2) {
    const std::size_t nr = h.rows(), nt = h.cols();
    if (nt == 0 || nr == 0) throw std::invalid_argument("vblast_ordering: empty channel");
    if (!(sigma_s2 > 0.0) || !(sigma_n2 > 0.0))
        throw std::invalid_argument("vblast_ordering: variances must be positive");

    std::vector<std::size_t> undecided(nt);
    for (std::size_t j = 0; j < nt; ++j) undecided[j] = j;
    std::vector<std::size_t> order;
    order.reserve(nt);

    while (!undecided.empty()) {
        // Covariance of r once the ordered streams are perfectly cancelled:
        // only the undecided columns of H still contribute.
        CMatrix ru(nr, nr);
        for (std::size_t a = 0; a < nr; ++a) {
            for (std::size_t b = 0; b < nr; ++b) {
                cplx acc(0.0, 0.0);
                for (std::size_t j : undecided) acc += h(a, j) * std::conj(h(b, j));
                ru(a, b) = sigma_s2 * acc;
            }
            ru(a, a) += sigma_n2;
        }
        CholFactor chol = factorize_hpd(ru);

        std::size_t best = undecided.front();
        double best_mmse = std::numeric_limits<double>::infinity();
        for (std::size_t j : undecided) {
            CVector p = h.col(j);
            for (cplx& e : p) e *= sigma_s2;
            const double mmse = sigma_s2 - std::real(cdot(p, chol.solve(p)));
            if (mmse < best_mmse) {
                best_mmse = mmse;
                best = j;
            }
        }
        order.push_back(best);
        undecided.erase(std::find(undecided.begin(), undecided.end(), best));
    }
    return order;
}

std::vector<BranchPlan> build_branch_plans(std::size_t n_tx, std::size_t branches,
                                           const CMatrix& h, double sigma_s2,
                                           double sigma_n2, double beta) {
    if (n_tx == 0 || h.cols() != n_tx) throw std::invalid_argument("build_branch_plans: bad channel");
    const std::size_t max_branches = saturated_factorial(n_tx) == std::numeric_limits<std::size_t>::max()
                                         ? std::numeric_limits<std::size_t>::max()
                                         : saturated_factorial(n_tx) + 1;
    if (branches < 1 || branches > max_branches)
        throw std::invalid_argument("build_branch_plans: branch count out of range");
    if (beta < 0.0 || beta > 1.0)
        throw std::invalid_argument("build_branch_plans: beta must lie in [0, 1]");

    const std::vector<std::size_t> base = vblast_ordering(h, sigma_s2, sigma_n2);
    const std::size_t n_sic = branches == 1 ? 1 : branches - 1;

    std::vector<std::vector<std::size_t>> orderings{base};
    // Cyclic left shifts of the base ordering; every shift of a permutation
    // sequence is distinct, but guard anyway to keep the set duplicate-free.
    for (std::size_t t = 1; orderings.size() < n_sic && t < n_tx; ++t) {
        std::vector<std::size_t> cand(n_tx);
        for (std::size_t k = 0; k < n_tx; ++k) cand[k] = base[(k + t) % n_tx];
        if (std::find(orderings.begin(), orderings.end(), cand) == orderings.end())
            orderings.push_back(std::move(cand));
    }
    if (orderings.size() < n_sic) {
        std::vector<std::size_t> perm(n_tx);
        for (std::size_t k = 0; k < n_tx; ++k) perm[k] = k;
        do {
            if (std::find(orderings.begin(), orderings.end(), perm) == orderings.end())
                orderings.push_back(perm);
        } while (orderings.size() < n_sic && std::next_permutation(perm.begin(), perm.end()));
    }

    std::vector<BranchPlan> plans;
    plans.reserve(branches);
    for (const std::vector<std::size_t>& o : orderings) {
        BranchPlan plan;
        plan.index = plans.size();
        plan.kind = BranchKind::Sic;
        plan.ordering = o;
        plan.beta = beta;
        plan.stream_shape.reserve(n_tx);
        for (std::size_t k = 0; k < n_tx; ++k)
            plan.stream_shape.push_back(permuted_sic_shape(n_tx, k, o));
        plans.push_back(std::move(plan));
    }
    if (branches >= 2) {
        BranchPlan pic;
        pic.index = plans.size();
        pic.kind = BranchKind::Pic;
        pic.ordering.resize(n_tx);
        for (std::size_t k = 0; k < n_tx; ++k) pic.ordering[k] = k;
        pic.beta = beta;
        pic.stream_shape.reserve(n_tx);
        for (std::size_t j = 0; j < n_tx; ++j) pic.stream_shape.push_back(pic_shape(n_tx, j));
        plans.push_back(std::move(pic));
    }
    return plans;
}

}  // namespace mbdf

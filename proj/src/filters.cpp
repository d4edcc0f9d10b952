#include "mbdf/filters.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace mbdf {

namespace {

void check_design_inputs(std::size_t n_tx, const CMatrix& proj, double beta, std::size_t stream) {
    if (proj.rows() != n_tx || proj.cols() != n_tx)
        throw std::invalid_argument("filter design: projector has wrong shape");
    if (stream >= n_tx) throw std::invalid_argument("filter design: stream out of range");
    if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("filter design: beta must lie in [0, 1]");
}

// A = H H^H + (sigma_n2 / sigma_s2) I, the shared Gram system of the
// perfect-feedback solvers.
CMatrix gram_system(const CMatrix& h, double sigma_s2, double sigma_n2) {
    const std::size_t nr = h.rows(), nt = h.cols();
    CMatrix a(nr, nr);
    for (std::size_t i = 0; i < nr; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            cplx acc(0.0, 0.0);
            for (std::size_t k = 0; k < nt; ++k) acc += h(i, k) * std::conj(h(j, k));
            a(i, j) = acc;
            a(j, i) = std::conj(acc);
        }
        a(i, i) += sigma_n2 / sigma_s2;
    }
    return a;
}

}  // namespace

SecondOrderStats perfect_feedback_stats(const CMatrix& h, double sigma_s2, double sigma_n2) {
    const std::size_t nr = h.rows(), nt = h.cols();
    if (nr == 0 || nt == 0) throw std::invalid_argument("perfect_feedback_stats: empty channel");
    if (!(sigma_s2 > 0.0) || !(sigma_n2 > 0.0))
        throw std::invalid_argument("perfect_feedback_stats: variances must be positive");

    SecondOrderStats st;
    st.sigma_s2 = sigma_s2;
    st.r_cov = CMatrix(nr, nr);
    for (std::size_t i = 0; i < nr; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            cplx acc(0.0, 0.0);
            for (std::size_t k = 0; k < nt; ++k) acc += h(i, k) * std::conj(h(j, k));
            st.r_cov(i, j) = sigma_s2 * acc;
            st.r_cov(j, i) = std::conj(sigma_s2 * acc);
        }
        st.r_cov(i, i) += sigma_n2;
    }
    st.q = cplx(sigma_s2, 0.0) * h;
    st.p.reserve(nt);
    st.t.reserve(nt);
    for (std::size_t j = 0; j < nt; ++j) {
        CVector pj = h.col(j);
        for (cplx& e : pj) e *= sigma_s2;
        st.p.push_back(std::move(pj));
        st.t.emplace_back(nt, cplx(0.0, 0.0));
    }
    return st;
}

FilterPair design_filters_closed_form(const SecondOrderStats& stats, const CMatrix& proj,
                                      double beta, std::size_t stream) {
    const std::size_t nr = stats.q.rows(), nt = stats.q.cols();
    check_design_inputs(nt, proj, beta, stream);
    if (stats.r_cov.rows() != nr || stats.r_cov.cols() != nr || stats.p.size() != nt ||
        stats.t.size() != nt)
        throw std::invalid_argument("design_filters_closed_form: inconsistent statistics");

    FilterPair out;
    out.beta = beta;
    out.stream = stream;
    if (beta == 0.0) {
        out.w = hermitian_solve(stats.r_cov, stats.p[stream]);
        out.f = CVector(nt, cplx(0.0, 0.0));
    } else {
        // Eliminate f from the coupled conditions:
        // (r_cov - beta q proj q^H) w = p_j - beta q proj t_j.
        const CMatrix qp = stats.q * proj;
        CMatrix m = stats.r_cov - cplx(beta, 0.0) * (qp * stats.q.adjoint());
        // The product can leave a ~1e-16 Hermitian skew; symmetrize so the
        // solver's Hermitian check reflects the math, not the roundoff.
        for (std::size_t i = 0; i < nr; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                const cplx avg = 0.5 * (m(i, j) + std::conj(m(j, i)));
                m(i, j) = avg;
                m(j, i) = std::conj(avg);
            }
            m(i, i) = cplx(m(i, i).real(), 0.0);
        }
        const CVector rhs = stats.p[stream] - cplx(beta, 0.0) * matvec(qp, stats.t[stream]);
        out.w = hermitian_solve(m, rhs);
        out.f = matvec(proj, adjvec(stats.q, out.w) - stats.t[stream]);
        for (cplx& e : out.f) e *= beta;
    }
    out.mmse = mmse_value(out.w, out.f, stats);
    return out;
}

FilterPair design_filters_fixed_point(const CMatrix& h, const CMatrix& proj, double beta,
                                      std::size_t stream, double sigma_s2, double sigma_n2,
                                      double tol, std::size_t max_sweeps) {
    const std::size_t nt = h.cols();
    check_design_inputs(nt, proj, beta, stream);
    if (!(sigma_s2 > 0.0) || !(sigma_n2 > 0.0))
        throw std::invalid_argument("design_filters_fixed_point: variances must be positive");
    if (!(tol > 0.0) || max_sweeps == 0)
        throw std::invalid_argument("design_filters_fixed_point: bad iteration controls");

    const CholFactor chol = factorize_hpd(gram_system(h, sigma_s2, sigma_n2));
    const SecondOrderStats stats = perfect_feedback_stats(h, sigma_s2, sigma_n2);

    CVector delta(nt, cplx(0.0, 0.0));
    delta[stream] = 1.0;
    CVector f(nt, cplx(0.0, 0.0));
    CVector w = chol.solve(matvec(h, delta));

    for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
        CVector hw = adjvec(h, w);
        for (cplx& e : hw) e *= sigma_s2;
        CVector f_new = matvec(proj, hw);
        for (cplx& e : f_new) e *= beta;
        const CVector w_new = chol.solve(matvec(h, delta + f_new));

        const double step = std::sqrt(sqnorm(w_new - w));
        w = w_new;
        f = std::move(f_new);
        if (step <= tol) {
            FilterPair out;
            out.w = std::move(w);
            out.f = std::move(f);
            out.beta = beta;
            out.stream = stream;
            out.iterations = sweep;
            out.mmse = mmse_value(out.w, out.f, stats);
            return out;
        }
    }

    FilterPair last;
    last.w = std::move(w);
    last.f = std::move(f);
    last.beta = beta;
    last.stream = stream;
    last.iterations = max_sweeps;
    last.mmse = mmse_value(last.w, last.f, stats);
    throw FilterConvergenceError(
        "filter fixed point did not converge within " + std::to_string(max_sweeps) + " sweeps",
        std::move(last));
}

double mmse_value(const CVector& w, const CVector& f, const SecondOrderStats& stats) {
    if (w.size() != stats.r_cov.rows())
        throw std::invalid_argument("mmse_value: feedforward filter has wrong length");
    return stats.sigma_s2 - std::real(cdot(w, matvec(stats.r_cov, w))) + sqnorm(f);
}

FilterBank build_filter_bank(const CMatrix& h, const std::vector<BranchPlan>& plans,
                             double sigma_s2, double sigma_n2) {
    const std::size_t nt = h.cols();
    if (plans.empty()) throw std::invalid_argument("build_filter_bank: no branch plans");
    if (!(sigma_s2 > 0.0) || !(sigma_n2 > 0.0))
        throw std::invalid_argument("build_filter_bank: variances must be positive");

    const CholFactor chol = factorize_hpd(gram_system(h, sigma_s2, sigma_n2));
    const CMatrix x = chol.solve(h);                              // A^{-1} H
    const CMatrix c = cplx(sigma_s2, 0.0) * (h.adjoint() * x);    // sigma_s2 H^H A^{-1} H
    const SecondOrderStats stats = perfect_feedback_stats(h, sigma_s2, sigma_n2);

    FilterBank bank;
    bank.linear_w.reserve(nt);
    for (std::size_t j = 0; j < nt; ++j) bank.linear_w.push_back(x.col(j));

    bank.pairs.reserve(plans.size());
    bank.branch_mmse_sum.reserve(plans.size());
    for (const BranchPlan& plan : plans) {
        if (plan.ordering.size() != nt || plan.stream_shape.size() != nt)
            throw std::invalid_argument("build_filter_bank: plan does not match channel");
        std::vector<FilterPair> branch;
        branch.reserve(nt);
        double mmse_sum = 0.0;
        for (std::size_t k = 0; k < nt; ++k) {
            const std::size_t j = plan.ordering[k];
            const CMatrix& proj = plan.stream_shape[k].proj;

            // The shape projectors are 0/1 diagonal; recover the allowed tap
            // set from the diagonal (exact, no roundoff in these entries).
            std::vector<std::size_t> allowed;
            allowed.reserve(nt);
            bool diagonal = true;
            for (std::size_t a = 0; a < nt && diagonal; ++a)
                for (std::size_t b = 0; b < nt; ++b)
                    if (a != b && std::abs(proj(a, b)) > 1e-12) {
                        diagonal = false;
                        break;
                    }
            for (std::size_t a = 0; a < nt; ++a)
                if (proj(a, a).real() > 0.5) allowed.push_back(a);

            FilterPair pr;
            pr.beta = plan.beta;
            pr.stream = j;
            pr.branch = plan.index;
            if (!diagonal) {
                pr = design_filters_closed_form(stats, proj, plan.beta, j);
                pr.branch = plan.index;
            } else if (plan.beta == 0.0 || allowed.empty()) {
                pr.w = bank.linear_w[j];
                pr.f = CVector(nt, cplx(0.0, 0.0));
            } else {
                // Restricted system (I - beta C_DD) f_D = beta C_{D,j}.
                const std::size_t nd = allowed.size();
                CMatrix sys(nd, nd);
                CVector rhs(nd);
                for (std::size_t a = 0; a < nd; ++a) {
                    for (std::size_t b = 0; b < nd; ++b)
                        sys(a, b) = (a == b ? cplx(1.0, 0.0) : cplx(0.0, 0.0)) -
                                    plan.beta * c(allowed[a], allowed[b]);
                    rhs[a] = plan.beta * c(allowed[a], j);
                }
                const CVector fd = lu_solve(std::move(sys), std::move(rhs));
                pr.f = CVector(nt, cplx(0.0, 0.0));
                for (std::size_t a = 0; a < nd; ++a) pr.f[allowed[a]] = fd[a];
                CVector rhs_full = pr.f;
                rhs_full[j] += 1.0;
                pr.w = matvec(x, rhs_full);
            }
            pr.mmse = mmse_value(pr.w, pr.f, stats);
            mmse_sum += pr.mmse;
            branch.push_back(std::move(pr));
        }
        bank.pairs.push_back(std::move(branch));
        bank.branch_mmse_sum.push_back(mmse_sum);
    }
    return bank;
}

}  // namespace mbdf

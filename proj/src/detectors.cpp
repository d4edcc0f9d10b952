#include "mbdf/detectors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mbdf {

namespace {

double residual_metric(const CMatrix& h, const CVector& r, const CVector& cand) {
    double acc = 0.0;
    for (std::size_t a = 0; a < h.rows(); ++a) {
        cplx e = r[a];
        const cplx* row = h.row(a);
        for (std::size_t j = 0; j < h.cols(); ++j) e -= row[j] * cand[j];
        acc += std::norm(e);
    }
    return acc;
}

// Successive or parallel cancellation for one branch. `init` must hold the
// linear initial decisions when the branch is parallel; `out` receives the
// candidate and is used as the running feedback vector for successive
// branches (feedback taps outside a stream's allowed set are structurally
// zero in f, so undecided entries never leak through).
void run_branch_into(const BranchPlan& plan, const std::vector<FilterPair>& pairs,
                     const CVector& r, const Constellation& c, const CVector& init,
                     CVector& out) {
    const std::size_t nt = plan.ordering.size();
    out.assign(nt, cplx(0.0, 0.0));
    const CVector& feedback = plan.kind == BranchKind::Pic ? init : out;
    for (std::size_t k = 0; k < nt; ++k) {
        const std::size_t j = plan.ordering[k];
        const FilterPair& pr = pairs[k];
        const cplx z = cdot(pr.w, r) - cdot(pr.f, feedback);
        out[j] = slice(z, c);
    }
}

void linear_decisions(const std::vector<CVector>& w, const CVector& r, const Constellation& c,
                      CVector& out) {
    out.resize(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) out[j] = slice(cdot(w[j], r), c);
}

DetectionResult single_candidate_result(const CMatrix& h, const CVector& r, CVector symbols) {
    DetectionResult res;
    res.metrics.push_back(residual_metric(h, r, symbols));
    res.candidates.push_back(symbols);
    res.symbols = std::move(symbols);
    res.selected_branch = 0;
    return res;
}

}  // namespace

CMatrix reversal_matrix(std::size_t n) {
    CMatrix t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, n - 1 - i) = 1.0;
    return t;
}

std::pair<std::size_t, std::vector<double>> select_branch(const std::vector<CVector>& candidates,
                                                          const CMatrix& h, const CVector& r) {
    if (candidates.empty()) throw std::invalid_argument("select_branch: no candidates");
    std::vector<double> metrics;
    metrics.reserve(candidates.size());
    std::size_t best = 0;
    double best_metric = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < candidates.size(); ++l) {
        const double m = residual_metric(h, r, candidates[l]);
        metrics.push_back(m);
        if (m < best_metric) {
            best_metric = m;
            best = l;
        }
    }
    return {best, std::move(metrics)};
}

CVector run_branch(const CMatrix& h, const CVector& r, const BranchPlan& plan,
                   const FilterBank& bank, const Constellation& c) {
    if (plan.index >= bank.pairs.size())
        throw std::invalid_argument("run_branch: plan does not belong to this bank");
    const std::vector<FilterPair>& pairs = bank.pairs[plan.index];
    if (pairs.size() != plan.ordering.size() || h.cols() != plan.ordering.size())
        throw std::invalid_argument("run_branch: inconsistent plan, bank, and channel");
    CVector init;
    if (plan.kind == BranchKind::Pic) linear_decisions(bank.linear_w, r, c, init);
    CVector out;
    run_branch_into(plan, pairs, r, c, init, out);
    return out;
}

MbDfDetector::MbDfDetector(const CMatrix& h, double sigma_s2, double sigma_n2,
                           std::size_t branches, std::size_t stages, double beta,
                           const Constellation& c, SelectionMetric metric)
    : h_(h),
      c_(&c),
      metric_(metric),
      stages_(stages),
      plans_(build_branch_plans(h.cols(), branches, h, sigma_s2, sigma_n2, beta)),
      bank_(build_filter_bank(h, plans_, sigma_s2, sigma_n2)) {
    if (stages_ == 0) throw std::invalid_argument("MbDfDetector: stages must be >= 1");
    if (stages_ >= 2) {
        if (plans_.back().kind == BranchKind::Pic) {
            refine_ = bank_.pairs.back();
        } else {
            // Single-branch configuration: build the full-feedback pairs from
            // a standalone parallel plan.
            const std::size_t nt = h.cols();
            BranchPlan pic;
            pic.kind = BranchKind::Pic;
            pic.ordering.resize(nt);
            pic.beta = beta;
            for (std::size_t j = 0; j < nt; ++j) {
                pic.ordering[j] = j;
                pic.stream_shape.push_back(pic_shape(nt, j));
            }
            refine_ = build_filter_bank(h, {pic}, sigma_s2, sigma_n2).pairs.front();
        }
    }
    if (metric_ == SelectionMetric::SumMmse) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < bank_.branch_mmse_sum.size(); ++l) {
            if (bank_.branch_mmse_sum[l] < best) {
                best = bank_.branch_mmse_sum[l];
                preselected_ = l;
            }
        }
    }
}

void MbDfDetector::detect_into(const CVector& r, Workspace& ws, CVector& out) const {
    const std::size_t nt = h_.cols();
    const std::size_t n_branches = plans_.size();
    ws.candidates.resize(n_branches);
    ws.metrics.assign(n_branches, 0.0);

    bool have_init = false;
    for (std::size_t l = 0; l < n_branches; ++l) {
        if (plans_[l].kind == BranchKind::Pic && !have_init) {
            linear_decisions(bank_.linear_w, r, *c_, ws.init);
            have_init = true;
        }
        run_branch_into(plans_[l], bank_.pairs[l], r, *c_, ws.init, ws.candidates[l]);
    }

    // Later stages rerun every branch with full feedback seeded by that
    // branch's previous candidate, walking the branch's ordering backwards on
    // even stages so late-detected streams get refined first.
    for (std::size_t m = 2; m <= stages_; ++m) {
        const bool reversed = m % 2 == 0;
        for (std::size_t l = 0; l < n_branches; ++l) {
            CVector& s = ws.candidates[l];
            const std::vector<std::size_t>& o = plans_[l].ordering;
            for (std::size_t idx = 0; idx < nt; ++idx) {
                const std::size_t j = o[reversed ? nt - 1 - idx : idx];
                const FilterPair& pr = refine_[j];
                s[j] = slice(cdot(pr.w, r) - cdot(pr.f, s), *c_);
            }
        }
    }

    if (metric_ == SelectionMetric::SumMmse) {
        ws.metrics = bank_.branch_mmse_sum;
        ws.selected = preselected_;
    } else {
        std::size_t best = 0;
        double best_metric = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < n_branches; ++l) {
            ws.metrics[l] = residual_metric(h_, r, ws.candidates[l]);
            if (ws.metrics[l] < best_metric) {
                best_metric = ws.metrics[l];
                best = l;
            }
        }
        ws.selected = best;
    }
    out = ws.candidates[ws.selected];
}

DetectionResult MbDfDetector::detect(const CVector& r) const {
    Workspace ws;
    DetectionResult res;
    detect_into(r, ws, res.symbols);
    res.candidates = std::move(ws.candidates);
    res.metrics = std::move(ws.metrics);
    res.selected_branch = ws.selected;
    return res;
}

LinearDetector::LinearDetector(const CMatrix& h, double sigma_s2, double sigma_n2,
                               const Constellation& c)
    : h_(h), c_(&c) {
    const SecondOrderStats stats = perfect_feedback_stats(h, sigma_s2, sigma_n2);
    const CholFactor chol = factorize_hpd(stats.r_cov);
    w_.reserve(h.cols());
    for (std::size_t j = 0; j < h.cols(); ++j) w_.push_back(chol.solve(stats.p[j]));
}

void LinearDetector::detect_into(const CVector& r, CVector& out) const {
    linear_decisions(w_, r, *c_, out);
}

DetectionResult LinearDetector::detect(const CVector& r) const {
    CVector s;
    detect_into(r, s);
    return single_candidate_result(h_, r, std::move(s));
}

OsicDetector::OsicDetector(const CMatrix& h, double sigma_s2, double sigma_n2,
                           const Constellation& c)
    : h_(h), c_(&c), order_(vblast_ordering(h, sigma_s2, sigma_n2)) {
    const std::size_t nr = h.rows(), nt = h.cols();
    h_cols_.reserve(nt);
    for (std::size_t j = 0; j < nt; ++j) h_cols_.push_back(h.col(j));

    std::vector<bool> decided(nt, false);
    w_.reserve(nt);
    for (std::size_t k = 0; k < nt; ++k) {
        const std::size_t j = order_[k];
        // MMSE nulling filter on the deflated channel (decided columns removed).
        CMatrix ru(nr, nr);
        for (std::size_t a = 0; a < nr; ++a) {
            for (std::size_t b = 0; b <= a; ++b) {
                cplx acc(0.0, 0.0);
                for (std::size_t u = 0; u < nt; ++u)
                    if (!decided[u]) acc += h(a, u) * std::conj(h(b, u));
                ru(a, b) = sigma_s2 * acc;
                ru(b, a) = std::conj(sigma_s2 * acc);
            }
            ru(a, a) += sigma_n2;
        }
        CVector p = h_cols_[j];
        for (cplx& e : p) e *= sigma_s2;
        w_.push_back(hermitian_solve(ru, p));
        decided[j] = true;
    }
}

void OsicDetector::detect_into(const CVector& r, CVector& out) const {
    const std::size_t nt = h_.cols();
    out.assign(nt, cplx(0.0, 0.0));
    CVector rc = r;
    for (std::size_t k = 0; k < nt; ++k) {
        const std::size_t j = order_[k];
        const cplx s = slice(cdot(w_[k], rc), *c_);
        out[j] = s;
        const CVector& hj = h_cols_[j];
        for (std::size_t a = 0; a < rc.size(); ++a) rc[a] -= hj[a] * s;
    }
}

DetectionResult OsicDetector::detect(const CVector& r) const {
    CVector s;
    detect_into(r, s);
    return single_candidate_result(h_, r, std::move(s));
}

MlDetector::MlDetector(const CMatrix& h, const Constellation& c)
    : nt_(h.cols()), nr_(h.rows()), c_(&c), h_(h) {
    const std::size_t n_points = c.points.size();
    const std::size_t cap = 1000000;
    std::size_t n = 1;
    for (std::size_t j = 0; j < nt_; ++j) {
        if (n > cap / n_points)
            throw UnsupportedSizeError("exhaustive search space exceeds " + std::to_string(cap) +
                                       " candidates");
        n *= n_points;
    }
    n_cand_ = n;

    // Odometer enumeration, stream 0 the most significant digit; candidate
    // order is part of the tie-break contract (lowest index wins).
    sym_idx_.resize(n_cand_ * nt_);
    hs_.assign(n_cand_ * nr_, cplx(0.0, 0.0));
    std::vector<std::size_t> digits(nt_, 0);
    for (std::size_t cidx = 0; cidx < n_cand_; ++cidx) {
        for (std::size_t j = 0; j < nt_; ++j) sym_idx_[cidx * nt_ + j] = digits[j];
        cplx* row = hs_.data() + cidx * nr_;
        for (std::size_t a = 0; a < nr_; ++a) {
            cplx acc(0.0, 0.0);
            for (std::size_t j = 0; j < nt_; ++j) acc += h(a, j) * c.points[digits[j]];
            row[a] = acc;
        }
        for (std::size_t j = nt_; j-- > 0;) {
            if (++digits[j] < n_points) break;
            digits[j] = 0;
        }
    }
}

void MlDetector::detect_into(const CVector& r, CVector& out) const {
    std::size_t best = 0;
    double best_metric = std::numeric_limits<double>::infinity();
    for (std::size_t cidx = 0; cidx < n_cand_; ++cidx) {
        const cplx* row = hs_.data() + cidx * nr_;
        double acc = 0.0;
        for (std::size_t a = 0; a < nr_; ++a) acc += std::norm(r[a] - row[a]);
        if (acc < best_metric) {
            best_metric = acc;
            best = cidx;
        }
    }
    out.resize(nt_);
    for (std::size_t j = 0; j < nt_; ++j) out[j] = c_->points[sym_idx_[best * nt_ + j]];
}

DetectionResult MlDetector::detect(const CVector& r) const {
    CVector s;
    detect_into(r, s);
    return single_candidate_result(h_, r, std::move(s));
}

DetectionResult detect_linear(const CMatrix& h, const CVector& r, double sigma_s2,
                              double sigma_n2, const Constellation& c) {
    return LinearDetector(h, sigma_s2, sigma_n2, c).detect(r);
}

DetectionResult detect_osic_vblast(const CMatrix& h, const CVector& r, double sigma_s2,
                                   double sigma_n2, const Constellation& c) {
    return OsicDetector(h, sigma_s2, sigma_n2, c).detect(r);
}

DetectionResult detect_sdf(const CMatrix& h, const CVector& r, double sigma_s2, double sigma_n2,
                           const Constellation& c) {
    return MbDfDetector(h, sigma_s2, sigma_n2, 1, 1, 1.0, c).detect(r);
}

DetectionResult detect_mb_mmse_df(const CMatrix& h, const CVector& r, double sigma_s2,
                                  double sigma_n2, std::size_t branches, double beta,
                                  const Constellation& c) {
    return MbDfDetector(h, sigma_s2, sigma_n2, branches, 1, beta, c).detect(r);
}

DetectionResult detect_multistage(const CMatrix& h, const CVector& r, double sigma_s2,
                                  double sigma_n2, std::size_t branches, std::size_t stages,
                                  double beta, const Constellation& c) {
    return MbDfDetector(h, sigma_s2, sigma_n2, branches, stages, beta, c).detect(r);
}

DetectionResult detect_ml_exhaustive(const CMatrix& h, const CVector& r, const Constellation& c) {
    return MlDetector(h, c).detect(r);
}

}  // namespace mbdf

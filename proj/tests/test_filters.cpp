#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mbdf/channel.hpp"
#include "mbdf/constraints.hpp"
#include "mbdf/filters.hpp"
#include "mbdf/modem.hpp"
#include "mbdf/rng.hpp"

using namespace mbdf;

namespace {

double vec_dist(const CVector& a, const CVector& b) {
    REQUIRE(a.size() == b.size());
    return std::sqrt(sqnorm(a - b));
}

CVector random_qpsk_vector(std::size_t n, RngStream& rng) {
    const Constellation& c = qpsk();
    std::vector<std::uint8_t> bits(2 * n);
    for (std::uint8_t& b : bits) b = rng.bit() ? 1 : 0;
    return modulate(bits, c);
}

// Empirical mean of |s_j - (w^H r - f^H s)|^2 with perfect feedback.
double empirical_mse(const CMatrix& h, const FilterPair& pair, double sigma_n2,
                     std::size_t draws, RngStream& rng) {
    double acc = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        const CVector s = random_qpsk_vector(h.cols(), rng);
        const CVector r = transmit(h, s, sigma_n2, rng);
        const cplx z = cdot(pair.w, r) - cdot(pair.f, s);
        acc += std::norm(s[pair.stream] - z);
    }
    return acc / static_cast<double>(draws);
}

}  // namespace

TEST_CASE("perfect-feedback statistics of the identity channel") {
    const SecondOrderStats st = perfect_feedback_stats(CMatrix::identity(2), 1.0, 0.5);
    CHECK(fro_norm(st.r_cov - cplx(1.5, 0.0) * CMatrix::identity(2)) < 1e-12);
    CHECK(fro_norm(st.q - CMatrix::identity(2)) < 1e-12);
    REQUIRE(st.p.size() == 2);
    CHECK(vec_dist(st.p[0], CVector{1.0, 0.0}) < 1e-12);
    CHECK(vec_dist(st.p[1], CVector{0.0, 1.0}) < 1e-12);
    REQUIRE(st.t.size() == 2);
    CHECK(sqnorm(st.t[0]) == 0.0);
    CHECK(sqnorm(st.t[1]) == 0.0);
    CHECK(st.sigma_s2 == 1.0);

    CHECK_THROWS_AS(perfect_feedback_stats(CMatrix::identity(2), 1.0, 0.0),
                    std::invalid_argument);
}

TEST_CASE("received covariance minus the noise floor is positive semidefinite") {
    RngStream rng(3001, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const CMatrix h = random_channel(4, 4, rng);
        const SecondOrderStats st = perfect_feedback_stats(h, 1.0, 0.4);
        const CMatrix signal = st.r_cov - cplx(0.4, 0.0) * CMatrix::identity(4);
        for (int i = 0; i < 20; ++i) {
            const CVector x = complex_gaussian(4, 1.0, rng);
            CHECK(cdot(x, matvec(signal, x)).real() >= -1e-10);
        }
    }
}

TEST_CASE("analytic second-order statistics match simulated averages") {
    RngStream rng(3001, 1);
    const CMatrix h = random_channel(4, 4, rng);
    const double sigma_n2 = 0.4;
    const SecondOrderStats st = perfect_feedback_stats(h, 1.0, sigma_n2);

    const std::size_t draws = 100000;
    CMatrix r_hat(4, 4);
    std::vector<CVector> p_hat(4, CVector(4, cplx(0.0, 0.0)));
    for (std::size_t n = 0; n < draws; ++n) {
        const CVector s = random_qpsk_vector(4, rng);
        const CVector r = transmit(h, s, sigma_n2, rng);
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) r_hat(i, j) += r[i] * std::conj(r[j]);
            for (std::size_t j = 0; j < 4; ++j) p_hat[j][i] += r[i] * std::conj(s[j]);
        }
    }
    const cplx inv_draws(1.0 / static_cast<double>(draws), 0.0);
    r_hat = inv_draws * r_hat;
    CHECK(fro_norm(r_hat - st.r_cov) / fro_norm(st.r_cov) < 0.02);
    for (std::size_t j = 0; j < 4; ++j) {
        const CVector scaled = inv_draws * p_hat[j];
        CHECK(vec_dist(scaled, st.p[j]) / std::sqrt(sqnorm(st.p[j])) < 0.02);
    }
}

TEST_CASE("closed form on the identity channel matches the hand solution") {
    const double rho = 0.3;
    const SecondOrderStats st = perfect_feedback_stats(CMatrix::identity(2), 1.0, rho);
    const ShapeConstraint shape = sic_shape(2, 1);  // second stream, first decided
    const FilterPair pair = design_filters_closed_form(st, shape.proj, 1.0, 1);
    CHECK(vec_dist(pair.w, CVector{0.0, cplx(1.0 / (1.0 + rho), 0.0)}) < 1e-12);
    CHECK(std::sqrt(sqnorm(pair.f)) < 1e-12);  // identity channel: nothing to cancel
    CHECK(pair.mmse == doctest::Approx(rho / (1.0 + rho)).epsilon(1e-10));
    CHECK(pair.iterations == 0);
}

TEST_CASE("zero feedback magnitude reproduces the linear MMSE filter exactly") {
    RngStream rng(3001, 2);
    const CMatrix h = random_channel(4, 4, rng);
    const SecondOrderStats st = perfect_feedback_stats(h, 1.0, 0.4);
    const ShapeConstraint shape = sic_shape(4, 2);
    const FilterPair pair = design_filters_closed_form(st, shape.proj, 0.0, 1);
    const CVector linear = hermitian_solve(st.r_cov, st.p[1]);
    CHECK(vec_dist(pair.w, linear) <= 1e-10);
    for (const cplx& e : pair.f) CHECK(e == cplx(0.0, 0.0));
}

TEST_CASE("closed-form solutions satisfy both optimality conditions") {
    RngStream rng(3001, 3);
    for (int trial = 0; trial < 10; ++trial) {
        const CMatrix h = random_channel(4, 4, rng);
        const SecondOrderStats st = perfect_feedback_stats(h, 1.0, 0.4);
        const std::vector<BranchPlan> plans = build_branch_plans(4, 4, h, 1.0, 0.4, 1.0);
        for (double beta : {1.0, 0.6}) {
            for (const BranchPlan& plan : plans) {
                for (std::size_t k = 0; k < 4; ++k) {
                    const std::size_t j = plan.ordering[k];
                    const CMatrix& proj = plan.stream_shape[k].proj;
                    const FilterPair pair = design_filters_closed_form(st, proj, beta, j);

                    // w = r_cov^{-1} (p_j + q f)
                    const CVector w_opt =
                        hermitian_solve(st.r_cov, st.p[j] + matvec(st.q, pair.f));
                    CHECK(vec_dist(pair.w, w_opt) <= 1e-8);

                    // f = beta proj (q^H w - t_j)
                    CVector f_opt = matvec(proj, adjvec(st.q, pair.w) - st.t[j]);
                    for (cplx& e : f_opt) e *= beta;
                    CHECK(vec_dist(pair.f, f_opt) <= 1e-8);
                }
            }
        }
    }
}

TEST_CASE("fixed point with zero feedback converges in one sweep") {
    RngStream rng(3001, 4);
    const CMatrix h = random_channel(4, 4, rng);
    const SecondOrderStats st = perfect_feedback_stats(h, 1.0, 0.4);
    const ShapeConstraint shape = sic_shape(4, 2);
    const FilterPair fp = design_filters_fixed_point(h, shape.proj, 0.0, 1, 1.0, 0.4);
    CHECK(fp.iterations == 1);
    const FilterPair cf = design_filters_closed_form(st, shape.proj, 0.0, 1);
    CHECK(vec_dist(fp.w, cf.w) <= 1e-10);
    CHECK(sqnorm(fp.f) == 0.0);
}

TEST_CASE("fixed point matches the hand solution on the identity channel") {
    const ShapeConstraint shape = sic_shape(2, 1);
    const FilterPair fp = design_filters_fixed_point(CMatrix::identity(2), shape.proj, 1.0, 1,
                                                     1.0, 0.3);
    CHECK(vec_dist(fp.w, CVector{0.0, cplx(1.0 / 1.3, 0.0)}) < 1e-9);
    CHECK(std::sqrt(sqnorm(fp.f)) < 1e-9);
}

TEST_CASE("closed form and fixed point agree across random channels") {
    RngStream rng(3001, 5);
    int agreeing_channels = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const CMatrix h = random_channel(4, 4, rng);
        const SecondOrderStats st = perfect_feedback_stats(h, 1.0, 0.4);
        const std::vector<BranchPlan> plans = build_branch_plans(4, 4, h, 1.0, 0.4, 1.0);
        bool all_match = true;
        for (const BranchPlan& plan : plans) {
            for (std::size_t k = 0; k < 4; ++k) {
                const std::size_t j = plan.ordering[k];
                const CMatrix& proj = plan.stream_shape[k].proj;
                const FilterPair cf = design_filters_closed_form(st, proj, 1.0, j);
                const FilterPair fp = design_filters_fixed_point(h, proj, 1.0, j, 1.0, 0.4);
                if (vec_dist(cf.w, fp.w) > 1e-6 || vec_dist(cf.f, fp.f) > 1e-6)
                    all_match = false;
            }
        }
        agreeing_channels += all_match ? 1 : 0;
    }
    CHECK(agreeing_channels >= 99);
}

TEST_CASE("an exhausted sweep budget raises an error carrying the last iterate") {
    RngStream rng(3001, 6);
    const CMatrix h = random_channel(4, 4, rng);
    const ShapeConstraint shape = pic_shape(4, 0);
    bool threw = false;
    try {
        // Slow contraction (low noise), one sweep, unreachable tolerance.
        (void)design_filters_fixed_point(h, shape.proj, 1.0, 0, 1.0, 1e-3, 1e-14, 1);
    } catch (const FilterConvergenceError& err) {
        threw = true;
        const FilterPair& last = err.last_iterate();
        CHECK(last.w.size() == 4);
        CHECK(last.f.size() == 4);
        CHECK(last.iterations == 1);
        CHECK(last.stream == 0);
    }
    CHECK(threw);
}

TEST_CASE("filter design rejects malformed inputs") {
    const SecondOrderStats st = perfect_feedback_stats(CMatrix::identity(2), 1.0, 0.5);
    const ShapeConstraint shape = sic_shape(2, 1);
    CHECK_THROWS_AS(design_filters_closed_form(st, shape.proj, 1.5, 0), std::invalid_argument);
    CHECK_THROWS_AS(design_filters_closed_form(st, shape.proj, 1.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(design_filters_closed_form(st, CMatrix(3, 3), 1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(
        design_filters_fixed_point(CMatrix::identity(2), shape.proj, 1.0, 0, 1.0, 0.5, 0.0, 10),
        std::invalid_argument);
    CHECK_THROWS_AS(
        design_filters_fixed_point(CMatrix::identity(2), shape.proj, 1.0, 0, 1.0, 0.5, 1e-10, 0),
        std::invalid_argument);
}

TEST_CASE("analytic MSE formula on elementary cases") {
    const SecondOrderStats st2 = perfect_feedback_stats(CMatrix::identity(2), 1.0, 0.5);
    CHECK(mmse_value(CVector(2, cplx(0.0, 0.0)), CVector(2, cplx(0.0, 0.0)), st2) == 1.0);

    const SecondOrderStats st1 = perfect_feedback_stats(CMatrix::identity(1), 1.0, 1.0);
    const FilterPair scalar = design_filters_closed_form(st1, CMatrix(1, 1), 0.0, 0);
    CHECK(scalar.mmse == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(mmse_value(CVector(3), CVector(2), st2), std::invalid_argument);
}

TEST_CASE("analytic MSE matches simulation under perfect feedback") {
    RngStream rng(3001, 7);
    const CMatrix h = random_channel(4, 4, rng);
    const double sigma_n2 = 0.4;
    const SecondOrderStats st = perfect_feedback_stats(h, 1.0, sigma_n2);

    const FilterPair sic_pair =
        design_filters_closed_form(st, sic_shape(4, 2).proj, 1.0, 3);
    const double sic_mse = empirical_mse(h, sic_pair, sigma_n2, 100000, rng);
    CHECK(std::abs(sic_mse - sic_pair.mmse) <= 0.03 * sic_pair.mmse);

    const FilterPair pic_pair =
        design_filters_closed_form(st, pic_shape(4, 1).proj, 0.8, 1);
    const double pic_mse = empirical_mse(h, pic_pair, sigma_n2, 100000, rng);
    CHECK(std::abs(pic_mse - pic_pair.mmse) <= 0.03 * pic_pair.mmse);
}

TEST_CASE("feedback never raises the optimized MSE") {
    RngStream rng(3001, 8);
    for (int trial = 0; trial < 20; ++trial) {
        const CMatrix h = random_channel(4, 4, rng);
        const SecondOrderStats st = perfect_feedback_stats(h, 1.0, 0.4);
        for (std::size_t nd = 0; nd < 4; ++nd) {
            const CMatrix& proj = sic_shape(4, nd).proj;
            for (std::size_t j = 0; j < 4; ++j) {
                const FilterPair with = design_filters_closed_form(st, proj, 1.0, j);
                const FilterPair without = design_filters_closed_form(st, proj, 0.0, j);
                CHECK(with.mmse <= without.mmse + 1e-9);
                CHECK(with.mmse > 0.0);
                CHECK(with.mmse <= 1.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("the filter bank reproduces the closed form with one factorization") {
    RngStream rng(3001, 9);
    for (std::size_t branches : {std::size_t{4}, std::size_t{8}}) {
        const CMatrix h = random_channel(4, 6, rng);
        const SecondOrderStats st = perfect_feedback_stats(h, 1.0, 0.4);
        const std::vector<BranchPlan> plans = build_branch_plans(4, branches, h, 1.0, 0.4, 1.0);

        reset_factorization_counts();
        const FilterBank bank = build_filter_bank(h, plans, 1.0, 0.4);
        CHECK(factorization_count(6) == 1);  // one receive-sized factorization total

        REQUIRE(bank.pairs.size() == branches);
        double worst = 0.0;
        for (std::size_t l = 0; l < branches; ++l) {
            REQUIRE(bank.pairs[l].size() == 4);
            double mmse_sum = 0.0;
            for (std::size_t k = 0; k < 4; ++k) {
                const FilterPair& got = bank.pairs[l][k];
                const FilterPair want = design_filters_closed_form(
                    st, plans[l].stream_shape[k].proj, 1.0, plans[l].ordering[k]);
                worst = std::max(worst, vec_dist(got.w, want.w));
                worst = std::max(worst, vec_dist(got.f, want.f));
                worst = std::max(worst, std::abs(got.mmse - want.mmse));
                CHECK(got.stream == plans[l].ordering[k]);
                CHECK(got.branch == l);
                mmse_sum += got.mmse;
            }
            CHECK(bank.branch_mmse_sum[l] == doctest::Approx(mmse_sum).epsilon(1e-12));
        }
        CHECK(worst <= 1e-10);

        // The stored linear filters are the beta = 0 solutions.
        for (std::size_t j = 0; j < 4; ++j) {
            const CVector linear = hermitian_solve(st.r_cov, st.p[j]);
            CHECK(vec_dist(bank.linear_w[j], linear) <= 1e-10);
        }
    }
}

TEST_CASE("a zero-beta bank degenerates to the linear filters") {
    RngStream rng(3001, 10);
    const CMatrix h = random_channel(4, 4, rng);
    const std::vector<BranchPlan> plans = build_branch_plans(4, 4, h, 1.0, 0.4, 0.0);
    const FilterBank bank = build_filter_bank(h, plans, 1.0, 0.4);
    for (const std::vector<FilterPair>& branch : bank.pairs) {
        for (const FilterPair& pair : branch) {
            CHECK(sqnorm(pair.f) == 0.0);
            CHECK(vec_dist(pair.w, bank.linear_w[pair.stream]) == 0.0);
        }
    }
}

TEST_CASE("a single-branch bank still carries all per-stream pairs") {
    RngStream rng(3001, 11);
    const CMatrix h = random_channel(4, 4, rng);
    const std::vector<BranchPlan> plans = build_branch_plans(4, 1, h, 1.0, 0.4, 1.0);
    const FilterBank bank = build_filter_bank(h, plans, 1.0, 0.4);
    REQUIRE(bank.pairs.size() == 1);
    CHECK(bank.pairs[0].size() == 4);
    CHECK(bank.linear_w.size() == 4);
}

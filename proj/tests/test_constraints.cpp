#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "mbdf/channel.hpp"
#include "mbdf/constraints.hpp"
#include "mbdf/rng.hpp"

using namespace mbdf;

namespace {

CMatrix diag(const std::vector<double>& d) {
    CMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

// Sum of per-step MSEs when detecting in the given order, each step seeing
// only the still-undecided streams (perfect cancellation of earlier ones).
double ordering_cost(const CMatrix& h, const std::vector<std::size_t>& ordering,
                     double sigma_s2, double sigma_n2) {
    const std::size_t nt = h.cols();
    const std::size_t nr = h.rows();
    double cost = 0.0;
    for (std::size_t k = 0; k < nt; ++k) {
        CMatrix ru(nr, nr);
        for (std::size_t i = 0; i < nr; ++i) ru(i, i) = sigma_n2;
        for (std::size_t m = k; m < nt; ++m) {
            const CVector hu = h.col(ordering[m]);
            for (std::size_t i = 0; i < nr; ++i)
                for (std::size_t j = 0; j < nr; ++j) ru(i, j) += sigma_s2 * hu[i] * std::conj(hu[j]);
        }
        const CVector p = cplx(sigma_s2, 0.0) * h.col(ordering[k]);
        cost += sigma_s2 - cdot(p, hermitian_solve(ru, p)).real();
    }
    return cost;
}

std::vector<std::size_t> diagonal_taps(const CMatrix& proj) {
    std::vector<std::size_t> taps;
    for (std::size_t i = 0; i < proj.rows(); ++i) {
        if (proj(i, i).real() > 0.5) taps.push_back(i);
    }
    return taps;
}

}  // namespace

TEST_CASE("successive-cancellation shapes select exactly the decided streams") {
    const ShapeConstraint one = sic_shape(3, 1);
    CHECK(fro_norm(one.s - diag({0, 1, 1})) < 1e-12);
    CHECK(fro_norm(one.proj - diag({1, 0, 0})) < 1e-12);
    CHECK(sqnorm(one.v) == 0.0);

    const ShapeConstraint none = sic_shape(3, 0);
    CHECK(fro_norm(none.s - CMatrix::identity(3)) < 1e-12);
    CHECK(fro_norm(none.proj) < 1e-12);  // nothing decided: feedback pinned to zero

    const ShapeConstraint two = sic_shape(3, 2);
    CHECK(fro_norm(two.s - diag({0, 0, 1})) < 1e-12);
    CHECK(fro_norm(two.proj - diag({1, 1, 0})) < 1e-12);

    CHECK_THROWS_AS(sic_shape(3, 3), std::invalid_argument);
    CHECK_THROWS_AS(sic_shape(0, 0), std::invalid_argument);
}

TEST_CASE("permuted shapes with the identity ordering reduce to the canonical ones") {
    const std::vector<std::size_t> identity{0, 1, 2, 3};
    for (std::size_t nd = 0; nd < 4; ++nd) {
        const ShapeConstraint a = sic_shape(4, nd);
        const ShapeConstraint b = permuted_sic_shape(4, nd, identity);
        CHECK(fro_norm(a.s - b.s) < 1e-12);
        CHECK(fro_norm(a.proj - b.proj) < 1e-12);
    }
}

TEST_CASE("permuted shapes on two streams, enumerated by hand") {
    const std::vector<std::size_t> swapped{1, 0};
    // Step 0: nothing decided yet, so no feedback taps at all.
    const ShapeConstraint first = permuted_sic_shape(2, 0, swapped);
    CHECK(fro_norm(first.proj) < 1e-12);
    // Step 1: stream 1 was decided first and is the only allowed tap.
    const ShapeConstraint second = permuted_sic_shape(2, 1, swapped);
    CHECK(diagonal_taps(second.proj) == std::vector<std::size_t>{1});
    CHECK(fro_norm(second.proj - diag({0, 1})) < 1e-12);

    CHECK_THROWS_AS(permuted_sic_shape(2, 0, std::vector<std::size_t>{0, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(permuted_sic_shape(2, 0, std::vector<std::size_t>{0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(permuted_sic_shape(2, 0, std::vector<std::size_t>{0, 2}),
                    std::invalid_argument);
}

TEST_CASE("an ordering composed with its inverse gives back the canonical shape") {
    const std::vector<std::size_t> o{2, 0, 3, 1};
    std::vector<std::size_t> inv(4);
    for (std::size_t k = 0; k < 4; ++k) inv[o[k]] = k;
    std::vector<std::size_t> composed(4);
    for (std::size_t k = 0; k < 4; ++k) composed[k] = o[inv[k]];
    for (std::size_t nd = 0; nd < 4; ++nd) {
        const ShapeConstraint via = permuted_sic_shape(4, nd, composed);
        const ShapeConstraint canonical = sic_shape(4, nd);
        CHECK(fro_norm(via.s - canonical.s) < 1e-12);
        CHECK(fro_norm(via.proj - canonical.proj) < 1e-12);
    }
}

TEST_CASE("parallel-cancellation shapes free every tap except the stream's own") {
    const ShapeConstraint mid = pic_shape(3, 1);
    CHECK(fro_norm(mid.s - diag({0, 1, 0})) < 1e-12);
    CHECK(fro_norm(mid.proj - diag({1, 0, 1})) < 1e-12);

    const ShapeConstraint solo = pic_shape(1, 0);
    CHECK(fro_norm(solo.proj) < 1e-12);

    for (std::size_t nt = 1; nt <= 6; ++nt) {
        for (std::size_t j = 0; j < nt; ++j) {
            const ShapeConstraint sc = pic_shape(nt, j);
            CVector delta(nt);
            delta[j] = 1.0;
            CHECK(std::sqrt(sqnorm(matvec(sc.proj, delta))) < 1e-12);
        }
    }
    CHECK_THROWS_AS(pic_shape(3, 3), std::invalid_argument);
}

TEST_CASE("greedy ordering prefers the stronger stream and breaks ties low") {
    CMatrix strong_first(2, 2);
    strong_first(0, 0) = 2.0;
    strong_first(1, 1) = 1.0;
    CHECK(vblast_ordering(strong_first, 1.0, 0.1) == std::vector<std::size_t>{0, 1});

    CMatrix strong_second(2, 2);
    strong_second(0, 0) = 1.0;
    strong_second(1, 1) = 2.0;
    CHECK(vblast_ordering(strong_second, 1.0, 0.1) == std::vector<std::size_t>{1, 0});

    CHECK(vblast_ordering(CMatrix::identity(3), 1.0, 0.4) ==
          std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("greedy ordering is near-optimal across random channels") {
    RngStream rng(2001, 0);
    const double sigma_s2 = 1.0, sigma_n2 = 0.4;
    int not_worse = 0;
    int total = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const CMatrix h = random_channel(3, 3, rng);
        const std::vector<std::size_t> greedy = vblast_ordering(h, sigma_s2, sigma_n2);
        const double greedy_cost = ordering_cost(h, greedy, sigma_s2, sigma_n2);
        std::vector<std::size_t> perm{0, 1, 2};
        do {
            total += 1;
            if (ordering_cost(h, perm, sigma_s2, sigma_n2) >= greedy_cost - 1e-12) not_worse += 1;
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
    CHECK(total == 600);
    CHECK(not_worse >= 540);  // greedy at least matches 90% of all orderings
}

TEST_CASE("a single-branch plan is successive cancellation in greedy order") {
    RngStream rng(2001, 1);
    const CMatrix h = random_channel(4, 4, rng);
    const std::vector<BranchPlan> plans = build_branch_plans(4, 1, h, 1.0, 0.4, 1.0);
    REQUIRE(plans.size() == 1);
    CHECK(plans[0].kind == BranchKind::Sic);
    CHECK(plans[0].index == 0);
    CHECK(plans[0].ordering == vblast_ordering(h, 1.0, 0.4));
    REQUIRE(plans[0].stream_shape.size() == 4);
    CHECK(plans[0].beta == 1.0);

    // Step k may tap exactly the streams decided at steps 0..k-1.
    for (std::size_t k = 0; k < 4; ++k) {
        std::vector<std::size_t> want(plans[0].ordering.begin(),
                                      plans[0].ordering.begin() + static_cast<long>(k));
        std::sort(want.begin(), want.end());
        CHECK(diagonal_taps(plans[0].stream_shape[k].proj) == want);
    }
}

TEST_CASE("a four-branch plan cycles the base ordering and appends a parallel branch") {
    RngStream rng(2001, 2);
    const CMatrix h = random_channel(4, 4, rng);
    const std::vector<BranchPlan> plans = build_branch_plans(4, 4, h, 1.0, 0.4, 0.7);
    REQUIRE(plans.size() == 4);
    for (std::size_t l = 0; l < 4; ++l) {
        CHECK(plans[l].index == l);
        CHECK(plans[l].beta == 0.7);
    }
    CHECK(plans[0].kind == BranchKind::Sic);
    CHECK(plans[1].kind == BranchKind::Sic);
    CHECK(plans[2].kind == BranchKind::Sic);
    CHECK(plans[3].kind == BranchKind::Pic);

    const std::vector<std::size_t>& base = plans[0].ordering;
    for (std::size_t shift = 1; shift <= 2; ++shift) {
        for (std::size_t k = 0; k < 4; ++k)
            CHECK(plans[shift].ordering[k] == base[(k + shift) % 4]);
    }
    CHECK(plans[3].ordering == std::vector<std::size_t>{0, 1, 2, 3});

    // Parallel branch: stream detected at step k is k itself, taps are all
    // other streams.
    for (std::size_t k = 0; k < 4; ++k) {
        std::vector<std::size_t> want;
        for (std::size_t m = 0; m < 4; ++m)
            if (m != k) want.push_back(m);
        CHECK(diagonal_taps(plans[3].stream_shape[k].proj) == want);
    }
}

TEST_CASE("a saturated plan enumerates every ordering once") {
    RngStream rng(2001, 3);
    const CMatrix h = random_channel(4, 4, rng);
    const std::vector<BranchPlan> plans = build_branch_plans(4, 25, h, 1.0, 0.4, 1.0);
    REQUIRE(plans.size() == 25);
    std::set<std::vector<std::size_t>> seen;
    for (std::size_t l = 0; l + 1 < plans.size(); ++l) {
        CHECK(plans[l].kind == BranchKind::Sic);
        seen.insert(plans[l].ordering);
    }
    CHECK(seen.size() == 24);  // all 4! orderings, no duplicates
    CHECK(plans[24].kind == BranchKind::Pic);

    CHECK_THROWS_AS(build_branch_plans(4, 26, h, 1.0, 0.4, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_branch_plans(4, 0, h, 1.0, 0.4, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_branch_plans(4, 4, h, 1.0, 0.4, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(build_branch_plans(4, 4, h, 1.0, 0.4, -0.1), std::invalid_argument);
}

TEST_CASE("two streams saturate at three branches") {
    RngStream rng(2001, 4);
    const CMatrix h = random_channel(2, 2, rng);
    const std::vector<BranchPlan> plans = build_branch_plans(2, 3, h, 1.0, 0.4, 1.0);
    REQUIRE(plans.size() == 3);
    CHECK(plans[0].kind == BranchKind::Sic);
    CHECK(plans[1].kind == BranchKind::Sic);
    CHECK(plans[2].kind == BranchKind::Pic);
    CHECK(plans[0].ordering != plans[1].ordering);
    CHECK_THROWS_AS(build_branch_plans(2, 4, h, 1.0, 0.4, 1.0), std::invalid_argument);
}

TEST_CASE("every projected vector satisfies its shape constraint") {
    RngStream rng(2001, 5);
    const CMatrix h = random_channel(4, 4, rng);
    const std::vector<BranchPlan> plans = build_branch_plans(4, 25, h, 1.0, 0.4, 1.0);
    std::size_t checks = 0;
    for (const BranchPlan& plan : plans) {
        for (const ShapeConstraint& sc : plan.stream_shape) {
            for (int i = 0; i < 10; ++i) {
                const CVector x = complex_gaussian(4, 1.0, rng);
                const CVector f = matvec(sc.proj, x);
                CHECK(std::sqrt(sqnorm(matvec(sc.s, f))) <= 1e-10);
                checks += 1;
            }
        }
    }
    CHECK(checks == 1000);  // 25 branches x 4 steps x 10 draws
}

TEST_CASE("plan construction is deterministic") {
    RngStream rng(2001, 6);
    const CMatrix h = random_channel(4, 4, rng);
    const std::vector<BranchPlan> a = build_branch_plans(4, 8, h, 1.0, 0.25, 1.0);
    const std::vector<BranchPlan> b = build_branch_plans(4, 8, h, 1.0, 0.25, 1.0);
    REQUIRE(a.size() == b.size());
    for (std::size_t l = 0; l < a.size(); ++l) {
        CHECK(a[l].ordering == b[l].ordering);
        CHECK(a[l].kind == b[l].kind);
    }
}

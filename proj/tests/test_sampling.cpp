#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "anvil/sampling.hpp"

using namespace anvil;

namespace {

DesignSpaceSpec winged_space() {
    DesignSpaceSpec s;
    s.seed_design = SeedDesign::WingedBody;
    s.parameters = {{"nose_radius", 100.0, 800.0},   {"fuselage_length", 100.0, 800.0},
                    {"tail_length", 100.0, 800.0},   {"thickness_wing", 5.0, 50.0},
                    {"half_span", 50.0, 200.0},      {"chord", 50.0, 200.0}};
    return s;
}

/// Plain random LHS (independent of the library's improvement loop), used as
/// the brute-force comparison baseline.
SamplePlan random_lhs(std::size_t n, std::size_t d, Rng& rng) {
    SamplePlan p;
    p.n = n;
    p.d = d;
    p.points.resize(n * d);
    std::vector<std::size_t> perm(n);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
        for (std::size_t i = 0; i < n; ++i) {
            p.at(i, j) = (static_cast<double>(perm[i]) + 0.5) / static_cast<double>(n);
        }
    }
    return p;
}

} // namespace

TEST_CASE("uniform draw: 100 samples stay inside the scaled catalog ranges") {
    SamplePlan plan = uniform_random(100, 6, 7);
    CHECK(plan.n == 100);
    CHECK(plan.d == 6);
    auto rows = scale_to_space(plan, winged_space());
    REQUIRE(rows.size() == 100);
    const DesignSpaceSpec space = winged_space();
    for (const auto& row : rows) {
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(row[j] >= space.parameters[j].min_mm);
            CHECK(row[j] < space.parameters[j].max_mm);
        }
    }
}

TEST_CASE("determinism: the same seed reproduces the same matrix") {
    SamplePlan a = uniform_random(64, 5, 123);
    SamplePlan b = uniform_random(64, 5, 123);
    CHECK(a.points == b.points);
    SamplePlan c = lhs_maximin(32, 4, 9, 500);
    SamplePlan d = lhs_maximin(32, 4, 9, 500);
    CHECK(c.points == d.points);
    SamplePlan e = lhs_mincorr(32, 4, 9, 500);
    SamplePlan f = lhs_mincorr(32, 4, 9, 500);
    CHECK(e.points == f.points);
}

TEST_CASE("uniform draw: decile occupancy within binomial 4 sigma") {
    const std::size_t n = 10000;
    SamplePlan plan = uniform_random(n, 1, 31);
    long counts[10] = {0};
    for (std::size_t i = 0; i < n; ++i) {
        counts[static_cast<int>(plan.at(i, 0) * 10.0)] += 1;
    }
    double sigma = std::sqrt(n * 0.1 * 0.9);
    for (int b = 0; b < 10; ++b) {
        CAPTURE(b);
        CHECK(std::abs(counts[b] - 1000.0) <= 4.0 * sigma);
    }
}

TEST_CASE("lhs: one point per stratum in every dimension") {
    for (auto [n, d, seed] : {std::tuple<std::size_t, std::size_t, std::uint64_t>{4, 2, 1},
                              {16, 2, 2},
                              {20, 3, 3},
                              {50, 7, 4}}) {
        CAPTURE(n);
        CAPTURE(d);
        CHECK(is_latin_hypercube(lhs_maximin(n, d, seed, 200)));
        CHECK(is_latin_hypercube(lhs_mincorr(n, d, seed, 200)));
    }
}

TEST_CASE("lhs(4,2): each quartile holds exactly one coordinate") {
    SamplePlan plan = lhs_maximin(4, 2, 77, 100);
    for (std::size_t j = 0; j < 2; ++j) {
        bool seen[4] = {false, false, false, false};
        for (std::size_t i = 0; i < 4; ++i) {
            int q = static_cast<int>(plan.at(i, j) * 4.0);
            REQUIRE(q >= 0);
            REQUIRE(q < 4);
            CHECK_FALSE(seen[q]);
            seen[q] = true;
        }
    }
}

TEST_CASE("maximin: the improvement trace never decreases") {
    double prev = 0.0;
    for (long iters : {1L, 10L, 100L, 400L, 1500L}) {
        double v = min_pairwise_distance(lhs_maximin(16, 2, 5, iters));
        CAPTURE(iters);
        CHECK(v >= prev - 1e-15);
        prev = v;
    }
}

TEST_CASE("maximin(16,2): at least 0.9x the best of 1e5 random LHS draws") {
    SamplePlan plan = lhs_maximin(16, 2, 5, 1000);
    double ours = min_pairwise_distance(plan);
    Rng rng(1234);
    double best_random = 0.0;
    for (int t = 0; t < 100000; ++t) {
        best_random = std::max(best_random, min_pairwise_distance(random_lhs(16, 2, rng)));
    }
    CHECK(ours >= 0.9 * best_random);
}

TEST_CASE("mincorr: d=1 is vacuous but still a valid LHS") {
    SamplePlan plan = lhs_mincorr(12, 1, 8, 100);
    CHECK(is_latin_hypercube(plan));
    CHECK(max_abs_correlation(plan) == 0.0);
}

TEST_CASE("mincorr: trace never increases and beats the random-LHS median") {
    double prev = 1.0;
    for (long iters : {1L, 10L, 100L, 2000L}) {
        double v = max_abs_correlation(lhs_mincorr(20, 3, 6, iters));
        CAPTURE(iters);
        CHECK(v <= prev + 1e-15);
        prev = v;
    }

    SamplePlan plan = lhs_mincorr(20, 3, 6, 2000);
    double ours = max_abs_correlation(plan);
    Rng rng(4321);
    std::vector<double> random_vals;
    random_vals.reserve(10000);
    for (int t = 0; t < 10000; ++t) {
        random_vals.push_back(max_abs_correlation(random_lhs(20, 3, rng)));
    }
    std::nth_element(random_vals.begin(), random_vals.begin() + 5000, random_vals.end());
    CHECK(ours <= random_vals[5000]);
}

TEST_CASE("scale_to_space: affine endpoints, catalog midpoint, inverse round trip") {
    DesignSpaceSpec space = winged_space();
    SamplePlan plan;
    plan.n = 3;
    plan.d = 6;
    plan.points.assign(18, 0.0);
    for (std::size_t j = 0; j < 6; ++j) {
        plan.at(0, j) = 0.0;
        plan.at(1, j) = std::nextafter(1.0, 0.0);
        plan.at(2, j) = 0.5;
    }
    auto rows = scale_to_space(plan, space);
    for (std::size_t j = 0; j < 6; ++j) {
        CHECK(rows[0][j] == space.parameters[j].min_mm);
        CHECK(rows[1][j] < space.parameters[j].max_mm);
        CHECK(rows[1][j] == doctest::Approx(space.parameters[j].max_mm));
    }
    CHECK(rows[2][5] == doctest::Approx(125.0)); // chord midpoint of [50, 200]

    // inverse affine map recovers the unit coordinates
    for (std::size_t i = 0; i < plan.n; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            const DesignParameter& p = space.parameters[j];
            double unit = (rows[i][j] - p.min_mm) / (p.max_mm - p.min_mm);
            CHECK(std::abs(unit - plan.at(i, j)) < 1e-12);
        }
    }
}

TEST_CASE("dimension guard") {
    CHECK_THROWS_AS(uniform_random(10, 21, 1), const Error&);
    CHECK_THROWS_AS(lhs_maximin(10, 0, 1, 10), const Error&);
    try {
        uniform_random(10, 21, 1);
    } catch (const Error& e) {
        CHECK(e.code() == Err::DimensionLimitExceeded);
    }
}

TEST_CASE("dimension mismatch in scaling") {
    SamplePlan plan = uniform_random(5, 3, 1);
    try {
        scale_to_space(plan, winged_space());
        FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Err::DimensionMismatch);
    }
}

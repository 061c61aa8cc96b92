#include "nmlrd/bounds.hpp"
#include "nmlrd/errors.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace nmlrd;

TEST_CASE("bound report semantics") {
    const auto at_most = BoundReport::check("x", 1, "", 1.0, 2.0, BoundReport::Direction::bound_at_most);
    CHECK(at_most.satisfied);
    CHECK(at_most.slack == 1.0);
    const auto at_least = BoundReport::check("x", 1, "", 1.0, 2.0, BoundReport::Direction::bound_at_least);
    CHECK(!at_least.satisfied);
    CHECK(BoundReport::check("x", 1, "", 1.0, 1.5, BoundReport::Direction::bound_at_least, 0.5).satisfied);
}

TEST_CASE("envelope arithmetic") {
    const auto e = thm_envelope(Theorem::one, 256, 2, 2, 0.25, 1.0);
    CHECK(e.leading == doctest::Approx(1.386294).epsilon(1e-6));
    CHECK(e.complete);
    for (Theorem t : {Theorem::one, Theorem::two, Theorem::three, Theorem::four}) {
        CHECK(thm_envelope(t, 1'000'000, 3, 2, 0.2, 1.0).value < thm_envelope(t, 1000, 3, 2, 0.2, 1.0).value);
    }
    CHECK(!thm_envelope(Theorem::two, 256, 2, 2, 0.25, 1.0).complete);
    CHECK(thm_envelope(Theorem::two, 256, 2, 2, 0.25, 1.0, 1.0).complete);
    CHECK(v1_constant(2) == doctest::Approx(std::log(std::numbers::pi / std::sqrt(2.0 * std::numbers::pi)) +
                                            2.0 * std::log(2.0)));
    CHECK(gamma_n(100, 2, 2) == doctest::Approx(1.0 + std::log(17.0) / std::log(std::log(100.0))));
}

TEST_CASE("converse floors") {
    const double prefix = converse_floor(CoderKind::prefix, 64, 2, 2);
    CHECK(prefix == doctest::Approx(4.0 * (std::log(64.0) + 1.0) / 64.0));
    CHECK(prefix == doctest::Approx(0.322430).epsilon(1e-6));
    CHECK(converse_floor(CoderKind::non_prefix, 64, 2, 2) > prefix);
    CHECK(converse_floor(CoderKind::prefix, 1'000'000, 2, 2) < 1e-4);
    CHECK_THROWS_AS(converse_floor(CoderKind::non_prefix, 1, 2, 2), InvalidInput);
}

TEST_CASE("Taylor gap bound") {
    const auto h = DistortionMeasure::hamming(2);
    CHECK(gap_upper_bound_taylor(h, 10000, std::sqrt(6.0)) == doctest::Approx(2.678).epsilon(1e-3));
    double previous = INFINITY;
    for (int n = 2000; n <= 2'048'000; n *= 2) {
        const double b = gap_upper_bound_taylor(h, n, std::sqrt(6.0));
        CHECK(b < previous);
        previous = b;
    }
    CHECK_THROWS_AS(gap_upper_bound_taylor(h, 100, std::sqrt(6.0)), InvalidInput);
    CHECK_THROWS_AS(gap_upper_bound_taylor(h, 10000, 1.0), InvalidInput);
    const auto g = exact_gap(Distribution::bernoulli(0.3), 0.1, h, 10000);
    CHECK(std::abs(g.gap) <= gap_upper_bound_taylor(h, 10000, std::sqrt(6.0)));
}

TEST_CASE("binary gap lower bound") {
    CHECK(gap_lower_bound_binary(0.1, 100) == 0.0);
    const double expected = (0.003 * std::log(9.0) - 5e-5) *
                            (normal_cdf(2.0) - normal_cdf(1.0) - 0.82 / 30.0);
    CHECK(gap_lower_bound_binary(0.1, 10000) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(gap_lower_bound_binary(0.1, 10000) == doctest::Approx(7.10e-4).epsilon(2e-3));
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(normal_cdf(2.0) - normal_cdf(1.0) == doctest::Approx(0.1359051).epsilon(1e-6));
    CHECK_THROWS_AS(gap_lower_bound_binary(0.49, 100), InvalidInput);
    const double a = gap_lower_bound_binary(0.1, 10000) * 100.0;
    const double b = gap_lower_bound_binary(0.1, 40000) * 200.0;
    const double c = gap_lower_bound_binary(0.1, 160000) * 400.0;
    CHECK(std::abs(c - b) < std::abs(b - a));
}

TEST_CASE("exact gap agrees with the binomial oracle") {
    const auto h = DistortionMeasure::hamming(2);
    const auto g = exact_gap(Distribution::bernoulli(0.1), 0.1, h, 2000);
    CHECK(g.rate == 0.0);
    CHECK(g.gap == doctest::Approx(oracle::binary_expected_rd(0.1, 0.1, 2000)).epsilon(1e-9));
    CHECK(g.gap >= gap_lower_bound_binary(0.1, 2000));
}

TEST_CASE("restricted family") {
    const auto f = restricted_family_gap(0.1, 10000);
    CHECK(f.p1 == doctest::Approx(0.1001));
    CHECK(f.exact.gap >= f.analytic_lower);
    CHECK(f.exact.rate <= f.rate_ceiling);
    const auto g = restricted_family_gap(0.1, 90000);
    const double ratio = (g.exact.gap * 300.0) / (f.exact.gap * 100.0);
    CHECK(ratio > 1.0 / 3.0);
    CHECK(ratio < 3.0);
}

TEST_CASE("modulus of continuity probe") {
    const auto h = DistortionMeasure::hamming(2);
    const auto rows = modcont_probe(h, 0.1, {256, 4096}, 0.01);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].sup_gap < rows[0].sup_gap);
    for (const auto& r : modcont_probe(h, 1.0, {64, 256}, 0.05)) CHECK(r.sup_gap == 0.0);
}

#include "nmlrd/nml.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace nmlrd;

TEST_CASE("Shtarkov sum small cases") {
    CHECK(std::exp(shtarkov_sum(1, 2)) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(std::exp(shtarkov_sum(2, 2)) == doctest::Approx(2.5).epsilon(1e-14));
    for (int n = 1; n <= 9; ++n) {
        for (std::size_t K : {2u, 3u}) {
            const double exact = oracle::shtarkov_exhaustive(n, K);
            CHECK(std::abs(std::exp(shtarkov_sum(n, K)) / exact - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("Shtarkov asymptote approaches the exact sum") {
    double previous = INFINITY;
    for (int n : {100, 1000, 10000}) {
        const double gap = std::abs(shtarkov_sum(n, 2) - shtarkov_asymptote(n, 2));
        CHECK(gap < previous);
        previous = gap;
    }
    CHECK(previous < 0.01);
}

TEST_CASE("NML log probabilities") {
    const auto m1 = build_nml(1, 2);
    CHECK(nml_log_prob(Sequence{1}, m1) == doctest::Approx(std::log(0.5)));
    const auto m2 = build_nml(2, 2);
    CHECK(nml_log_prob(Sequence{0, 0}, m2) == doctest::Approx(std::log(1.0 / 2.5)));
    CHECK(nml_log_prob(Sequence{0, 1}, m2) == doctest::Approx(std::log(0.1)));

    const auto m = build_nml(7, 3);
    double total = 0.0;
    oracle::for_each_sequence(7, 3, [&](const std::vector<Symbol>& y) { total += std::exp(nml_log_prob(y, m)); });
    CHECK(std::abs(total - 1.0) < 1e-9);
}

TEST_CASE("NML sampling frequencies") {
    const auto m1 = build_nml(1, 2);
    const auto m2 = build_nml(2, 2);
    const int draws = 100000;
    int ones = 0;
    std::map<Sequence, int> pairs;
    for (int i = 0; i < draws; ++i) {
        CounterStream s(21, static_cast<std::uint64_t>(i));
        ones += sample_nml(m1, s)[0];
        CounterStream t(22, static_cast<std::uint64_t>(i));
        ++pairs[sample_nml(m2, t)];
    }
    CHECK(std::abs(ones / double(draws) - 0.5) < 0.005);
    CHECK(std::abs(pairs[Sequence{0, 0}] / double(draws) - 0.4) < 0.01);
    CHECK(std::abs(pairs[Sequence{0, 1}] / double(draws) - 0.1) < 0.01);
}

TEST_CASE("acceptance rate is 1/S_n for any target") {
    const int draws = 100000;
    for (auto [n, target] : {std::pair{1, std::vector<double>{0.5, 0.5}},
                             std::pair{2, std::vector<double>{0.3, 0.7}},
                             std::pair{2, std::vector<double>{1.0, 0.0}}}) {
        const auto m = build_nml(n, 2);
        AcceptRejectStream s(m, Distribution(target), 99);
        int accepted = 0;
        for (int i = 0; i < draws; ++i) accepted += s.next().accepted;
        const double rate = 1.0 / std::exp(m.log_shtarkov);
        CHECK(std::abs(accepted / double(draws) - rate) < 0.01);
    }
}

TEST_CASE("zero-mass target letters always reject") {
    const auto m = build_nml(3, 2);
    AcceptRejectStream s(m, Distribution({1.0, 0.0}), 5);
    for (int i = 0; i < 2000; ++i) {
        const auto d = s.next();
        if (d.accepted) CHECK(d.sequence == Sequence{0, 0, 0});
    }
}

TEST_CASE("stream determinism and raw regeneration") {
    const auto m = build_nml(10, 3);
    const Distribution q({0.2, 0.5, 0.3});
    AcceptRejectStream a(m, q, 1234), b(m, q, 1234);
    for (int i = 0; i < 500; ++i) {
        const auto x = a.next();
        const auto y = b.next();
        CHECK(x.index == static_cast<std::uint64_t>(i + 1));
        CHECK(x.accepted == y.accepted);
        CHECK(x.sequence == y.sequence);
        if (x.accepted) CHECK(raw_draw(m, 1234, x.index) == x.sequence);
    }
    CHECK(a.position() == 500);
}

TEST_CASE("next_within returns the first accepted draw inside the limit") {
    const auto m = build_nml(8, 2);
    const auto h = DistortionMeasure::hamming(2);
    const Sequence x{0, 1, 1, 0, 1, 0, 0, 0};
    const Distribution q({0.6, 0.4});
    AcceptRejectStream fast(m, q, 77), slow(m, q, 77);
    const auto hit = fast.next_within(x, h, 2.0, 1'000'000);
    REQUIRE(hit);
    while (true) {
        const auto d = slow.next();
        if (d.accepted && n_fold_distortion(x, d.sequence, h) * 8 <= 2.0) {
            CHECK(d.index == hit->index);
            CHECK(d.sequence == hit->sequence);
            break;
        }
    }
    AcceptRejectStream capped(m, q, 77);
    CHECK(!capped.next_within(x, h, -1.0, 100));
    CHECK(capped.position() == 100);
}

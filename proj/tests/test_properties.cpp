#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nmlrd/bounds.hpp"
#include "nmlrd/codec.hpp"
#include "nmlrd/dball.hpp"
#include "nmlrd/nml.hpp"
#include "nmlrd/rd_solver.hpp"
#include "nmlrd/type_engine.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace nmlrd;

namespace {

// Random instance generator: alphabet sizes, a real-valued measure with a
// zero in each row, a source law and a distortion level strictly inside
// (0, zero-rate distortion).
struct Instance {
    Distribution p;
    DistortionMeasure rho;
    double d;
};

Instance random_instance(CounterStream& rng, std::size_t max_size = 4) {
    const auto J = 2 + static_cast<std::size_t>(rng.below(max_size - 1));
    const auto K = 2 + static_cast<std::size_t>(rng.below(max_size - 1));
    while (true) {
        std::vector<double> raw(J * K);
        for (auto& v : raw) v = rng.uniform() * 2.0;
        auto rho = DistortionMeasure::normalized(J, K, raw, 2.0);
        auto p = Distribution(oracle::random_law(J, rng, 0.05));
        const double d0 = zero_rate_distortion(p, rho);
        // a column of row minima makes R identically zero; draw again
        if (d0 > 1e-3) return {p, rho, d0 * (0.05 + 0.9 * rng.uniform())};
    }
}

} // namespace

TEST_CASE("normalization is idempotent and distortion is permutation invariant") {
    CounterStream rng(1, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto J = 1 + static_cast<std::size_t>(rng.below(5));
        const auto K = 1 + static_cast<std::size_t>(rng.below(5));
        std::vector<double> raw(J * K);
        for (auto& v : raw) v = rng.uniform() * 3.0;
        const auto once = DistortionMeasure::normalized(J, K, raw, 3.0);
        const std::vector<double> again(once.entries().begin(), once.entries().end());
        const auto twice = DistortionMeasure::normalized(J, K, again, 3.0);
        REQUIRE(std::equal(once.entries().begin(), once.entries().end(), twice.entries().begin()));

        const auto n = 1 + static_cast<std::size_t>(rng.below(30));
        Sequence x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<Symbol>(rng.below(J));
            y[i] = static_cast<Symbol>(rng.below(K));
        }
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
        Sequence px(n), py(n);
        for (std::size_t i = 0; i < n; ++i) {
            px[i] = x[perm[i]];
            py[i] = y[perm[i]];
        }
        CHECK(n_fold_distortion(px, py, once) == doctest::Approx(n_fold_distortion(x, y, once)).epsilon(1e-14));
    }
}

TEST_CASE("RD solutions satisfy their structural invariants") {
    CounterStream rng(2, 0);
    for (int trial = 0; trial < 150; ++trial) {
        const auto [p, rho, d] = random_instance(rng);
        const auto s = solve_rd(p, d, rho);
        const std::size_t J = rho.J(), K = rho.K();
        for (std::size_t j = 0; j < J; ++j) {
            double row = 0.0;
            for (std::size_t k = 0; k < K; ++k) row += s.cond(j, k);
            CHECK(std::abs(row - 1.0) < 1e-10);
        }
        for (std::size_t k = 0; k < K; ++k) {
            double m = 0.0;
            for (std::size_t j = 0; j < J; ++j) m += p[j] * s.cond(j, k);
            CHECK(std::abs(m - s.q_out[k]) < 1e-10);
        }
        CHECK(s.achieved_distortion <= d + 1e-9);
        CHECK(s.lambda_star >= 0.0);
        CHECK(s.lambda_star <= std::min(std::log(J), std::log(K)) / d + 1e-9);
        CHECK(s.rate >= 0.0);
        CHECK(s.rate <= std::min(std::log(J), std::log(K)) + 1e-12);
        CHECK(std::abs(s.rate - mutual_information(p, s.q_cond, K)) < 1e-8);
        CHECK(s.kkt_residual <= 1e-10);
    }
}

TEST_CASE("RD is nonincreasing and convex in d with lambda a subgradient") {
    CounterStream rng(3, 0);
    for (int trial = 0; trial < 60; ++trial) {
        const auto [p, rho, d] = random_instance(rng);
        const double d0 = zero_rate_distortion(p, rho);
        const double d1 = d0 * (0.05 + 0.4 * rng.uniform());
        const double d2 = d1 + (d0 - d1) * rng.uniform();
        const double r1 = solve_rd(p, d1, rho).rate;
        const double r2 = solve_rd(p, d2, rho).rate;
        const double rm = solve_rd(p, 0.5 * (d1 + d2), rho).rate;
        CHECK(r1 >= r2 - 1e-10);
        CHECK(rm <= 0.5 * (r1 + r2) + 1e-8);

        const auto s = solve_rd(p, d, rho);
        const double h = 1e-4 * d;
        // convexity makes -lambda* a supporting slope on both sides
        CHECK(solve_rd(p, d - h, rho).rate >= s.rate + s.lambda_star * h - 1e-9);
        CHECK(solve_rd(p, d + h, rho).rate >= s.rate - s.lambda_star * h - 1e-9);
    }
}

TEST_CASE("expected_rd approaches R as n grows") {
    CounterStream rng(4, 0);
    for (int trial = 0; trial < 6; ++trial) {
        const auto [p, rho, d] = random_instance(rng, 3);
        const double rate = solve_rd(p, d, rho).rate;
        const double first = std::abs(expected_rd(p, d, rho, 16).value - rate);
        const double last = std::abs(expected_rd(p, d, rho, 128).value - rate);
        CHECK(last < first);
    }
}

TEST_CASE("type probabilities sum to one") {
    CounterStream rng(5, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto J = 2 + static_cast<std::size_t>(rng.below(2));
        const int n = 1 + static_cast<int>(rng.below(200));
        const auto p = Distribution(oracle::random_law(J, rng));
        double total = 0.0;
        const double skipped = visit_types(n, p, -INFINITY, [&](const NType&, double lp) { total += std::exp(lp); });
        CHECK(skipped == 0.0);
        CHECK(std::abs(total - 1.0) < 1e-10);
    }
}

TEST_CASE("acceptance rate is 1/S_n within 3 SE for random targets") {
    CounterStream rng(6, 0);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(6));
        const auto K = 2 + static_cast<std::size_t>(rng.below(2));
        const auto m = build_nml(n, K);
        AcceptRejectStream s(m, Distribution(oracle::random_law(K, rng)), trial);
        const int draws = 40000;
        int accepted = 0;
        for (int i = 0; i < draws; ++i) accepted += s.next().accepted;
        const double rate = std::exp(-m.log_shtarkov);
        const double se = std::sqrt(rate * (1.0 - rate) / draws);
        CHECK(std::abs(accepted / double(draws) - rate) <= 3.0 * se);
    }
}

TEST_CASE("integer codes round trip on random values") {
    CounterStream rng(7, 0);
    for (int trial = 0; trial < 20000; ++trial) {
        const unsigned bits = 1 + static_cast<unsigned>(rng.below(63));
        const std::uint64_t v = std::max<std::uint64_t>(1, rng.next() >> (64 - bits));
        REQUIRE(elias_decode(elias_encode(v)).value == v);
        REQUIRE(elias_decode(elias_encode(v)).consumed == elias_length(v));
        if (v < UINT64_MAX) REQUIRE(ftv_decode(ftv_encode(v)) == v);
    }
    for (int trial = 0; trial < 500; ++trial) {
        BitString b;
        const auto len = rng.below(100);
        for (std::uint64_t i = 0; i < len; ++i) b.push_back(rng.below(2) == 1);
        REQUIRE(BitString::unpack(b.pack(), b.padding()) == b);
    }
}

TEST_CASE("codec round trips on random measures are d-semifaithful and deterministic") {
    CounterStream rng(8, 0);
    for (int trial = 0; trial < 60; ++trial) {
        const auto rho = oracle::random_grid_measure(2 + rng.below(2), 2 + rng.below(2), rng, 4, 4);
        const int n = 16 + static_cast<int>(rng.below(48));
        Sequence x(static_cast<std::size_t>(n));
        for (auto& s : x) s = static_cast<Symbol>(rng.below(rho.J()));
        CodecConfig cfg;
        cfg.n = n;
        cfg.J = rho.J();
        cfg.K = rho.K();
        cfg.d = zero_rate_distortion(type_of(x, rho.J()).as_distribution(), rho) * (0.5 + 0.5 * rng.uniform()) + 0.05;
        cfg.coder = rng.below(2) ? CoderKind::prefix : CoderKind::non_prefix;
        cfg.seed = rng.next();
        const auto r = encode_traced(x, rho, cfg);
        const auto y = decode(deserialize(serialize(r.message)), cfg);
        REQUIRE(n_fold_distortion(x, y, rho) <= cfg.d);
        const double M = static_cast<double>(r.message.corrections.size());
        CHECK(r.trace.final_distortion <= (n - M) / n * slack_distortion(cfg, rho.rho_max()) + 1e-12);
        CHECK(serialize(encode(x, rho, cfg)) == serialize(r.message));
    }
}

TEST_CASE("tilted models are centered probability laws") {
    CounterStream rng(9, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto [p, rho, d] = random_instance(rng);
        const auto model = TiltedModel::from_solution(solve_rd(p, d, rho), rho);
        for (std::size_t j = 0; j < rho.J(); ++j) {
            double mass = 0.0;
            for (double m : model.letters[j].masses) mass += m;
            CHECK(std::abs(mass - 1.0) < 1e-10);
            CHECK(std::abs(model.centered_mean(j)) < 1e-10);
        }
    }
}

TEST_CASE("lucky strike inequality on gridded instances") {
    CounterStream rng(10, 0);
    for (int trial = 0; trial < 40; ++trial) {
        const auto rho = oracle::random_grid_measure(2 + rng.below(2), 2 + rng.below(2), rng);
        const int n = 4 + static_cast<int>(rng.below(30));
        Sequence x(static_cast<std::size_t>(n));
        for (auto& s : x) s = static_cast<Symbol>(rng.below(rho.J()));
        const double d0 = zero_rate_distortion(type_of(x, rho.J()).as_distribution(), rho);
        const double d = d0 > 0.0 ? d0 * (0.1 + 0.8 * rng.uniform()) : 0.1;
        const auto ls = lucky_strike_bound(x, rho, d, 0.2 * rng.uniform(), 3.0 * rng.uniform());
        CHECK(ls.ball >= ls.bound * (1.0 - 1e-10));
    }
}

TEST_CASE("uniform ratio bound holds for random types and measures at n = 64") {
    CounterStream rng(11, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto rho = oracle::random_grid_measure(2, 2 + rng.below(2), rng);
        const int n = 64;
        const auto ones = static_cast<int>(rng.below(65));
        const NType t({n - ones, ones});
        Sequence x(static_cast<std::size_t>(n), 0);
        std::fill(x.begin() + (n - ones), x.end(), 1);
        const double d0 = zero_rate_distortion(t.as_distribution(), rho);
        const double d = d0 > 0.0 ? d0 * (0.2 + 0.7 * rng.uniform()) : 0.2;
        const auto sol = rd_of_type(t, d, rho);
        const double threshold = d + 2.0 * rho.rho_max() / std::pow(n, 0.625);
        const double ball = ball_prob_exact(x, rho, sol->output(), threshold);
        const double ratio = std::exp(std::log(ball) + n * sol->rate);
        CHECK(ratio >= uniform_ratio_bound(n, rho.J(), rho.K(), d, rho.rho_max()));
    }
}

TEST_CASE("bound reports are reproducible and the gap lower bound is consistent") {
    CounterStream rng(12, 0);
    const auto h = DistortionMeasure::hamming(2);
    for (int trial = 0; trial < 12; ++trial) {
        const double d_bar = 0.05 + 0.3 * rng.uniform();
        const int n = 500 + static_cast<int>(rng.below(20000));
        if (!(2 * d_bar + 3 * std::sqrt(d_bar * (1 - d_bar) / n) < 1)) continue;
        const double lower = gap_lower_bound_binary(d_bar, n);
        const double gap = exact_gap(Distribution::bernoulli(d_bar), d_bar, h, n).gap;
        CHECK(lower <= gap);
        const auto a = BoundReport::check("lemma9", n, "x", lower, gap, BoundReport::Direction::bound_at_most);
        const auto b = BoundReport::check("lemma9", n, "x", gap_lower_bound_binary(d_bar, n),
                                          exact_gap(Distribution::bernoulli(d_bar), d_bar, h, n).gap,
                                          BoundReport::Direction::bound_at_most);
        CHECK(a.bound_value == b.bound_value);
        CHECK(a.compared_quantity == b.compared_quantity);
        CHECK(a.slack == b.slack);
    }
}

TEST_CASE("identical seeds give identical streams") {
    CounterStream rng(13, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(10));
        const auto K = 2 + static_cast<std::size_t>(rng.below(2));
        const auto m = build_nml(n, K);
        const Distribution target(oracle::random_law(K, rng, 0.05));
        const std::uint64_t seed = rng.next();
        AcceptRejectStream a(m, target, seed), b(m, target, seed);
        for (int i = 0; i < 200; ++i) {
            const auto da = a.next();
            const auto db = b.next();
            REQUIRE(da.index == db.index);
            REQUIRE(da.accepted == db.accepted);
            REQUIRE(da.sequence == db.sequence);
            if (da.accepted) REQUIRE(raw_draw(m, seed, da.index) == da.sequence);
        }
    }
}

#include "nmlrd/codec.hpp"
#include "nmlrd/errors.hpp"
#include "nmlrd/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace nmlrd;

namespace {

Sequence bernoulli_sequence(int n, double p1, std::uint64_t seed) {
    CounterStream s(seed, 0);
    Sequence x(static_cast<std::size_t>(n));
    for (auto& v : x) v = s.uniform() < p1 ? 1 : 0;
    return x;
}

CodecConfig config(int n, double d, CoderKind kind, std::uint64_t seed, std::size_t K = 2) {
    CodecConfig c;
    c.n = n;
    c.J = 2;
    c.K = K;
    c.d = d;
    c.coder = kind;
    c.seed = seed;
    return c;
}

} // namespace

TEST_CASE("slack distortion and correction count arithmetic") {
    const auto c = config(256, 0.25, CoderKind::prefix, 1);
    CHECK(slack_distortion(c, 1.0) == doctest::Approx(0.3125).epsilon(1e-14));
    CHECK(correction_count(c, 1.0) == 64);
    CHECK(correction_count(config(64, 0.1, CoderKind::prefix, 1), 1.0) == 64);
    CHECK(correction_count(config(4096, 0.5, CoderKind::prefix, 1), 1.0) == 91);
    auto bad = c;
    bad.slack_exponent = 0.5;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
    bad = c;
    bad.d = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("round trips are d-semifaithful for both coders") {
    const auto h = DistortionMeasure::hamming(2);
    for (CoderKind kind : {CoderKind::prefix, CoderKind::non_prefix}) {
        for (std::uint64_t trial = 0; trial < 40; ++trial) {
            const auto x = bernoulli_sequence(128, 0.1 + 0.01 * static_cast<double>(trial), trial);
            const auto cfg = config(128, 0.3, kind, 1000 + trial);
            const auto r = encode_traced(x, h, cfg);
            const auto y = decode(r.message, cfg);
            REQUIRE(n_fold_distortion(x, y, h) <= cfg.d);
            const double n = 128.0;
            const auto M = static_cast<double>(r.message.corrections.size());
            CHECK(r.trace.search_distortion <= slack_distortion(cfg, 1.0));
            CHECK(r.trace.final_distortion <= (n - M) / n * r.trace.search_distortion + 1e-15);
            CHECK(deserialize(serialize(r.message)) == r.message);
        }
    }
}

TEST_CASE("corrections replace the worst positions with zero-cost symbols") {
    const auto rho = DistortionMeasure(2, 3, {0, 2, 1, 2, 0, 1}, 2.0);
    auto cfg = config(64, 0.5, CoderKind::prefix, 4, 3);
    const auto x = bernoulli_sequence(64, 0.4, 9);
    const auto r = encode_traced(x, rho, cfg);
    const auto z = raw_draw(*shared_nml_model(64, 3), cfg.seed, r.trace.raw_index);
    const auto y = decode(r.message, cfg);
    std::size_t changed_outside = 0;
    std::size_t next = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const bool recorded = next < r.message.corrections.size() && r.message.corrections[next].position == i;
        if (recorded) {
            CHECK(rho(static_cast<std::size_t>(x[i]), static_cast<std::size_t>(y[i])) == 0.0);
            ++next;
        } else {
            changed_outside += y[i] != z[i];
        }
    }
    CHECK(changed_outside == 0);
    CHECK(next == r.message.corrections.size());
}

TEST_CASE("post-correction is exercised when the search stops above d") {
    const auto h = DistortionMeasure::hamming(2);
    bool exercised = false;
    for (std::uint64_t seed = 0; seed < 50 && !exercised; ++seed) {
        const auto x = bernoulli_sequence(32, 0.5, seed);
        const auto cfg = config(32, 0.4, CoderKind::prefix, seed);
        const auto r = encode_traced(x, h, cfg);
        CHECK(r.message.corrections.size() == 19);
        if (r.trace.search_distortion > cfg.d) {
            exercised = true;
            CHECK(r.trace.final_distortion <= cfg.d);
        }
    }
    CHECK(exercised);
}

TEST_CASE("zero-rate source decodes within d") {
    const auto h = DistortionMeasure::hamming(2);
    Sequence x(64, 0);
    x[3] = 1;
    const auto cfg = config(64, 0.2, CoderKind::prefix, 2);
    const auto r = encode_traced(x, h, cfg);
    CHECK(r.trace.rate == 0.0);
    CHECK(r.trace.accepted_draws <= 3);
    CHECK(n_fold_distortion(x, decode(r.message, cfg), h) <= 0.2);
}

TEST_CASE("bit accounting") {
    const auto h = DistortionMeasure::hamming(2);
    const auto x = bernoulli_sequence(256, 0.3, 1);
    const auto cfg = config(256, 0.25, CoderKind::prefix, 3);
    const auto r = encode_traced(x, h, cfg);
    const auto i = static_cast<double>(r.trace.raw_index);
    const double fl = std::floor(std::log2(i));
    CHECK(r.message.total_bits() <= 64 * (8 + 1) + fl + 2 * std::floor(std::log2(fl + 1)) + 1);
    CHECK(r.message.payload().size() == r.message.total_bits());
    CHECK(r.message.header.d_text == "0.25");
}

TEST_CASE("determinism: same inputs give identical bytes") {
    const auto h = DistortionMeasure::hamming(2);
    const auto x = bernoulli_sequence(128, 0.35, 5);
    const auto cfg = config(128, 0.2, CoderKind::non_prefix, 77);
    CHECK(serialize(encode(x, h, cfg)) == serialize(encode(x, h, cfg)));
    auto other = cfg;
    other.seed = 78;
    CHECK(serialize(encode(x, h, other)) != serialize(encode(x, h, cfg)));
}

TEST_CASE("concatenated prefix payloads split unambiguously") {
    const auto h = DistortionMeasure::hamming(2);
    const auto cfg = config(128, 0.2, CoderKind::prefix, 8);
    std::vector<CodedMessage> msgs;
    BitString stream;
    for (std::uint64_t k = 0; k < 3; ++k) {
        msgs.push_back(encode(bernoulli_sequence(128, 0.3, 40 + k), h, cfg));
        stream.append(msgs.back().payload());
    }
    const auto parts = split_prefix_stream(stream, cfg, msgs[0].header);
    REQUIRE(parts.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(parts[k] == msgs[k]);
    auto ftv = cfg;
    ftv.coder = CoderKind::non_prefix;
    CHECK_THROWS_AS(split_prefix_stream(stream, ftv, msgs[0].header), InvalidInput);
}

TEST_CASE("container framing errors") {
    const auto h = DistortionMeasure::hamming(2);
    const auto cfg = config(64, 0.3, CoderKind::prefix, 8);
    const auto bytes = serialize(encode(bernoulli_sequence(64, 0.3, 1), h, cfg));
    CHECK(bytes[0] == 'N');
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(deserialize(bad), FramingError);
    bad = bytes;
    bad[4] = 9;
    CHECK_THROWS_AS(deserialize(bad), FramingError);
    bad = bytes;
    bad.resize(bytes.size() - 3);
    CHECK_THROWS_AS(deserialize(bad), FramingError);
    bad = bytes;
    bad.resize(20);
    CHECK_THROWS_AS(deserialize(bad), FramingError);
    CHECK_THROWS_AS(deserialize({}), FramingError);

    const auto msg = deserialize(bytes);
    auto wrong = cfg;
    wrong.seed = 9;
    CHECK_THROWS_AS(decode(msg, wrong), FramingError);
    wrong = cfg;
    wrong.d = 0.31;
    CHECK_THROWS_AS(decode(msg, wrong), FramingError);
}

TEST_CASE("search overflow is reported") {
    const auto h = DistortionMeasure::hamming(2);
    auto cfg = config(256, 0.05, CoderKind::prefix, 1);
    cfg.index_cap = 10;
    CHECK_THROWS_AS(encode(bernoulli_sequence(256, 0.5, 3), h, cfg), SearchOverflow);
}

TEST_CASE("input validation") {
    const auto h = DistortionMeasure::hamming(2);
    const auto cfg = config(64, 0.3, CoderKind::prefix, 1);
    CHECK_THROWS_AS(encode(Sequence(63, 0), h, cfg), InvalidInput);
    CHECK_THROWS_AS(encode(Sequence(64, 2), h, cfg), InvalidInput);
    CHECK_THROWS_AS(encode(Sequence(64, 0), DistortionMeasure::hamming(3), cfg), InvalidInput);
}

TEST_CASE("empirical rate at d = rho_max is post-correction overhead") {
    const auto h = DistortionMeasure::hamming(2);
    const auto cfg = config(64, 1.0, CoderKind::prefix, 1);
    const auto r = empirical_rate(Distribution::bernoulli(0.3), h, cfg, 200, 4);
    const double M = static_cast<double>(correction_count(cfg, 1.0));
    CHECK(r.max_distortion <= 1.0);
    CHECK(r.mean_nats <= (M * (6 + 1) + 8) * std::log(2.0) / 64.0);
    CHECK(r.expected_rd == 0.0);
    CHECK(r.mean_bits == doctest::Approx(r.mean_nats / std::log(2.0)));
}

#include "nmlrd/nml.hpp"

#include "nmlrd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace nmlrd {

namespace {

double log_sum_exp(const std::vector<double>& v) {
    const double top = *std::max_element(v.begin(), v.end());
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - top);
    return top + std::log(acc);
}

} // namespace

double log_max_likelihood(std::span<const int> counts) {
    long long n = 0;
    for (int c : counts) n += c;
    double acc = 0.0;
    for (int c : counts) {
        if (c > 0) acc += c * std::log(static_cast<double>(c) / static_cast<double>(n));
    }
    return acc;
}

NmlModel build_nml(int n, std::size_t K, std::size_t type_limit) {
    if (n < 1) throw InvalidInput("build_nml: n must be at least 1");
    if (K < 1) throw InvalidInput("build_nml: K must be at least 1");
    NmlModel m;
    m.n = n;
    m.K = K;
    m.types = enumerate_types(n, K, type_limit);
    m.type_weights.resize(m.types.size());
    for (std::size_t i = 0; i < m.types.size(); ++i) {
        m.type_weights[i] = m.types.log_sizes[i] + log_max_likelihood(m.types.types[i].counts());
    }
    m.log_shtarkov = log_sum_exp(m.type_weights);
    m.type_cdf.resize(m.types.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < m.types.size(); ++i) {
        acc += std::exp(m.type_weights[i] - m.log_shtarkov);
        m.type_cdf[i] = acc;
    }
    return m;
}

double shtarkov_sum(int n, std::size_t K, std::size_t type_limit) {
    return build_nml(n, K, type_limit).log_shtarkov;
}

double shtarkov_asymptote(int n, std::size_t K) {
    const auto k = static_cast<double>(K);
    return (k - 1.0) / 2.0 * std::log(static_cast<double>(n)) + k * std::lgamma(0.5) -
           (k - 1.0) / 2.0 * std::log(2.0 * std::numbers::pi) - std::lgamma(k / 2.0);
}

double nml_log_prob(std::span<const Symbol> y, const NmlModel& model) {
    if (y.size() != static_cast<std::size_t>(model.n)) {
        throw InvalidInput("nml_log_prob: sequence length does not match n");
    }
    validate_sequence(y, model.K, "nml_log_prob");
    std::vector<int> counts(model.K, 0);
    for (Symbol s : y) ++counts[static_cast<std::size_t>(s)];
    return log_max_likelihood(counts) - model.log_shtarkov;
}

std::size_t sample_nml_type(const NmlModel& model, CounterStream& stream) {
    const double u = stream.uniform() * model.type_cdf.back();
    auto it = std::upper_bound(model.type_cdf.begin(), model.type_cdf.end(), u);
    const auto i = static_cast<std::size_t>(it - model.type_cdf.begin());
    return std::min(i, model.type_cdf.size() - 1);
}

Sequence sample_nml(const NmlModel& model, CounterStream& stream) {
    return sample_uniform_from_type_class(model.types.types[sample_nml_type(model, stream)], stream);
}

Sequence raw_draw(const NmlModel& model, std::uint64_t seed, std::uint64_t index) {
    CounterStream stream(seed, index);
    stream.next();  // acceptance word
    return sample_nml(model, stream);
}

AcceptRejectStream::AcceptRejectStream(const NmlModel& model, Distribution target,
                                       std::uint64_t seed)
    : model_(model),
      target_(std::move(target)),
      seed_(seed) {
    if (target_.size() != model.K) {
        throw InvalidInput("accept_reject_stream: target size does not match K");
    }
    std::vector<double> log_target(model.K);
    for (std::size_t k = 0; k < model.K; ++k) {
        log_target[k] = target_[k] > 0.0 ? std::log(target_[k])
                                         : -std::numeric_limits<double>::infinity();
    }
    log_ratio_.resize(model.types.size());
    for (std::size_t i = 0; i < model.types.size(); ++i) {
        const auto counts = model.types.types[i].counts();
        double acc = 0.0;
        for (std::size_t k = 0; k < model.K; ++k) {
            if (counts[k] > 0) acc += counts[k] * log_target[k];
        }
        log_ratio_[i] = acc - log_max_likelihood(counts);
    }
}

StreamDraw AcceptRejectStream::next() {
    StreamDraw draw;
    draw.index = ++index_;
    CounterStream stream(seed_, draw.index);
    const double u = stream.uniform();
    const std::size_t type = sample_nml_type(model_, stream);
    draw.accepted = std::log(u) < log_ratio_[type];
    if (draw.accepted) {
        draw.sequence = sample_uniform_from_type_class(model_.types.types[type], stream);
    }
    return draw;
}

std::optional<StreamDraw> AcceptRejectStream::next_within(std::span<const Symbol> x,
                                                          const DistortionMeasure& rho,
                                                          double limit, std::uint64_t cap,
                                                          std::uint64_t* accepted_count) {
    if (x.size() != static_cast<std::size_t>(model_.n)) {
        throw InvalidInput("accept_reject_stream: source length does not match n");
    }
    Sequence y(x.size());
    while (index_ < cap) {
        const std::uint64_t index = ++index_;
        CounterStream stream(seed_, index);
        const double u = stream.uniform();
        const std::size_t type = sample_nml_type(model_, stream);
        if (!(std::log(u) < log_ratio_[type])) continue;
        if (accepted_count) ++*accepted_count;
        TypeClassWalker walk(model_.types.types[type], stream);
        double sum = 0.0;
        std::size_t i = 0;
        for (; i < y.size(); ++i) {
            y[i] = walk.next();
            sum += rho(static_cast<std::size_t>(x[i]), static_cast<std::size_t>(y[i]));
            if (sum > limit) break;
        }
        if (i == y.size()) return StreamDraw{index, true, std::move(y)};
    }
    return std::nullopt;
}

} // namespace nmlrd

#include "nmlrd/type_engine.hpp"

#include "nmlrd/errors.hpp"
#include "nmlrd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nmlrd {

namespace {

double log_binomial(int r, int m) {
    return std::lgamma(r + 1.0) - std::lgamma(m + 1.0) - std::lgamma(r - m + 1.0);
}

// m ln q with 0 ln 0 = 0.
double xlogy(int m, double q) {
    if (m == 0) return 0.0;
    if (q <= 0.0) return -std::numeric_limits<double>::infinity();
    return m * std::log(q);
}

std::string counts_text(std::span<const int> counts) {
    std::string s = "(";
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(counts[i]);
    }
    return s + ")";
}

struct TypeVisitor {
    const Distribution& p;
    double threshold;
    const std::function<void(const NType&, double)>& visit;
    std::vector<double> tail;  // tail[j] = sum_{i >= j} p(i)
    std::vector<int> counts;
    double skipped = 0.0;

    void run(std::size_t j, int remaining, double log_prefix) {
        const std::size_t J = counts.size();
        if (j + 1 == J) {
            counts[j] = remaining;
            double lp = log_prefix;
            if (remaining > 0 && tail[j] <= 0.0) lp = -std::numeric_limits<double>::infinity();
            if (lp >= threshold) {
                visit(NType(counts), lp);
            } else {
                skipped += std::exp(lp);
            }
            return;
        }
        const double q = tail[j] > 0.0 ? std::min(1.0, p[j] / tail[j]) : 0.0;
        for (int m = remaining; m >= 0; --m) {
            const double lp =
                log_prefix + log_binomial(remaining, m) + xlogy(m, q) + xlogy(remaining - m, 1.0 - q);
            counts[j] = m;
            if (lp < threshold) {
                skipped += std::exp(lp);
                continue;
            }
            run(j + 1, remaining - m, lp);
        }
    }
};

} // namespace

std::uint64_t type_count(int n, std::size_t J) {
    // C(n+J-1, J-1) built up incrementally; each partial product is itself a
    // binomial coefficient, so the division is exact.
    unsigned __int128 acc = 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t i = 1; i < J; ++i) {
        acc = acc * static_cast<unsigned __int128>(n + i) / i;
        if (acc > limit) return limit;
    }
    return static_cast<std::uint64_t>(acc);
}

double log_multinomial(std::span<const int> counts) {
    int n = 0;
    double acc = 0.0;
    for (int c : counts) {
        n += c;
        acc -= std::lgamma(c + 1.0);
    }
    return acc + std::lgamma(n + 1.0);
}

TypeTable enumerate_types(int n, std::size_t J, std::size_t limit) {
    if (n < 1) throw InvalidInput("enumerate_types: n must be at least 1");
    if (J < 1) throw InvalidInput("enumerate_types: J must be at least 1");
    const std::uint64_t count = type_count(n, J);
    if (count > limit) {
        throw ResourceLimit("enumerate_types: " + std::to_string(count) + " types for n = " +
                            std::to_string(n) + ", J = " + std::to_string(J) +
                            " exceeds the limit " + std::to_string(limit));
    }
    TypeTable table;
    table.n = n;
    table.J = J;
    table.types.reserve(count);
    table.log_sizes.reserve(count);
    std::vector<int> counts(J, 0);
    // Walk compositions in order: first count descending, then recursively.
    auto rec = [&](auto&& self, std::size_t j, int remaining) -> void {
        if (j + 1 == J) {
            counts[j] = remaining;
            table.types.emplace_back(counts);
            table.log_sizes.push_back(log_multinomial(counts));
            return;
        }
        for (int m = remaining; m >= 0; --m) {
            counts[j] = m;
            self(self, j + 1, remaining - m);
        }
    };
    rec(rec, 0, n);
    return table;
}

double type_class_log_prob(const NType& t, const Distribution& p) {
    if (t.alphabet_size() != p.size()) {
        throw InvalidInput("type_class_log_prob: type alphabet does not match the distribution");
    }
    double acc = log_multinomial(t.counts());
    for (std::size_t j = 0; j < p.size(); ++j) {
        acc += xlogy(t[j], p[j]);
    }
    return acc;
}

double visit_types(int n, const Distribution& p, double log_threshold,
                   const std::function<void(const NType&, double)>& visit) {
    if (n < 1) throw InvalidInput("visit_types: n must be at least 1");
    TypeVisitor v{p, log_threshold, visit, std::vector<double>(p.size() + 1, 0.0),
                  std::vector<int>(p.size(), 0)};
    for (std::size_t j = p.size(); j-- > 0;) v.tail[j] = v.tail[j + 1] + p[j];
    v.run(0, n, 0.0);
    return v.skipped;
}

namespace {

ExpectedRd expected_rd_exact(const Distribution& p, double d, const DistortionMeasure& rho, int n,
                             const ExpectedRdOptions& options, RdCache& cache) {
    std::vector<NType> types;
    std::vector<double> log_probs;
    ExpectedRd out;
    out.truncated_mass = visit_types(n, p, options.log_prob_floor, [&](const NType& t, double lp) {
        types.push_back(t);
        log_probs.push_back(lp);
    });

    std::vector<double> rates(types.size());
    parallel_for(types.size(), [&](std::size_t i) {
        try {
            rates[i] = rd_of_type(types[i], d, rho, cache, options.solver)->rate;
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(std::string(e.what()) + " at type " +
                                       counts_text(types[i].counts()),
                                   e.best());
        }
    });
    double sum = 0.0;
    for (std::size_t i = 0; i < types.size(); ++i) sum += std::exp(log_probs[i]) * rates[i];
    out.value = sum;
    out.exact = true;
    out.types_evaluated = types.size();
    return out;
}

ExpectedRd expected_rd_monte_carlo(const Distribution& p, double d, const DistortionMeasure& rho,
                                   int n, const ExpectedRdOptions& options, RdCache& cache) {
    if (options.mc_samples < 2) throw InvalidInput("expected_rd: need at least 2 Monte Carlo samples");
    const std::size_t J = p.size();
    std::vector<double> cdf(J);
    double acc = 0.0;
    for (std::size_t j = 0; j < J; ++j) cdf[j] = (acc += p[j]);

    const auto samples = static_cast<std::size_t>(options.mc_samples);
    std::vector<double> rates(samples);
    parallel_for(samples, [&](std::size_t s) {
        CounterStream stream(options.seed, s);
        std::vector<int> counts(J, 0);
        for (int i = 0; i < n; ++i) {
            const double u = stream.uniform() * acc;
            auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
            std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), J - 1);
            while (p[j] == 0.0 && j > 0) --j;
            ++counts[j];
        }
        rates[s] = rd_of_type(NType(counts), d, rho, cache, options.solver)->rate;
    });
    double mean = 0.0;
    for (double r : rates) mean += r;
    mean /= static_cast<double>(samples);
    double var = 0.0;
    for (double r : rates) var += (r - mean) * (r - mean);
    var /= static_cast<double>(samples - 1);

    ExpectedRd out;
    out.value = mean;
    out.standard_error = std::sqrt(var / static_cast<double>(samples));
    out.exact = false;
    out.types_evaluated = samples;
    return out;
}

} // namespace

ExpectedRd expected_rd(const Distribution& p, double d, const DistortionMeasure& rho, int n,
                       const ExpectedRdOptions& options) {
    if (n < 1) throw InvalidInput("expected_rd: n must be at least 1");
    if (p.size() != rho.J()) throw InvalidInput("expected_rd: distribution size does not match J");
    if (!(d > 0.0)) throw InvalidInput("expected_rd: d must be positive");
    RdCache& cache = options.cache ? *options.cache : default_rd_cache();
    const auto J = static_cast<int>(p.size());
    const bool exact_feasible =
        J <= 2 || (J <= options.max_exact_J && n <= options.max_exact_n);
    if (options.force_monte_carlo || !exact_feasible) {
        return expected_rd_monte_carlo(p, d, rho, n, options, cache);
    }
    return expected_rd_exact(p, d, rho, n, options, cache);
}

TailMass tail_mass_outside_ball(const Distribution& p, int n, double a) {
    const auto J = static_cast<double>(p.size());
    if (!(a >= std::sqrt(2.0 + 2.0 * J))) {
        throw InvalidInput("tail_mass_outside_ball: radius factor a = " + std::to_string(a) +
                           " is below sqrt(2 + 2J) = " + std::to_string(std::sqrt(2.0 + 2.0 * J)));
    }
    if (n < 2) throw InvalidInput("tail_mass_outside_ball: n must be at least 2");
    const double radius = a * std::sqrt(std::log(static_cast<double>(n)) / n);
    TailMass out;
    out.bound = std::exp(J - 1.0) / (static_cast<double>(n) * n);
    // Types below e^-745 underflow anyway; their mass is added in full.
    const double skipped = visit_types(n, p, -745.0, [&](const NType& t, double lp) {
        double dist2 = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double diff = static_cast<double>(t[j]) / n - p[j];
            dist2 += diff * diff;
        }
        if (std::sqrt(dist2) > radius) out.mass += std::exp(lp);
    });
    out.mass += skipped;
    return out;
}

TypeClassWalker::TypeClassWalker(const NType& t, CounterStream& stream)
    : remaining_(t.counts().begin(), t.counts().end()),
      left_(static_cast<std::uint64_t>(t.n())),
      stream_(stream) {}

Symbol TypeClassWalker::next() {
    if (left_ == 0) throw InvalidInput("type class walk already complete");
    auto u = static_cast<std::int64_t>(stream_.below(left_));
    std::size_t j = 0;
    while (u >= remaining_[j]) u -= remaining_[j++];
    --remaining_[j];
    --left_;
    return static_cast<Symbol>(j);
}

Sequence sample_uniform_from_type_class(const NType& t, CounterStream& stream) {
    Sequence seq(static_cast<std::size_t>(t.n()));
    TypeClassWalker walk(t, stream);
    for (auto& s : seq) s = walk.next();
    return seq;
}

} // namespace nmlrd

#include "nmlrd/dball.hpp"

#include "nmlrd/errors.hpp"
#include "nmlrd/parallel.hpp"
#include "nmlrd/rng.hpp"
#include "nmlrd/type_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace nmlrd {

TiltedModel TiltedModel::from_solution(const RDSolution& sol, const DistortionMeasure& rho) {
    TiltedModel m;
    m.lambda_star = sol.lambda_star;
    m.rate = sol.rate;
    m.letters.resize(rho.J());
    for (std::size_t j = 0; j < rho.J(); ++j) {
        auto& L = m.letters[j];
        L.values.resize(rho.K());
        L.masses.resize(rho.K());
        for (std::size_t k = 0; k < rho.K(); ++k) {
            L.values[k] = rho(j, k);
            L.masses[k] = sol.cond(j, k);
            L.center += L.masses[k] * L.values[k];
        }
    }
    return m;
}

double TiltedModel::centered_mean(std::size_t j) const {
    const auto& L = letters.at(j);
    double acc = 0.0;
    for (std::size_t k = 0; k < L.values.size(); ++k) acc += L.masses[k] * (L.values[k] - L.center);
    return acc;
}

double SumLaw::cdf(std::int64_t limit) const {
    double acc = 0.0;
    for (const auto& [key, p] : atoms) {
        if (key > limit) break;
        acc += p;
    }
    return std::min(acc, 1.0);
}

SumLaw distortion_sum_law(std::span<const Symbol> x, const DistortionMeasure& rho,
                          const std::vector<std::vector<double>>& law_of,
                          std::int64_t max_cells) {
    validate_sequence(x, rho.J(), "source sequence");
    const auto& grid = rho.grid();
    if (!grid) {
        throw CapabilityError("exact ball probability needs a distortion measure on a rational "
                              "grid; use the Monte Carlo estimate instead");
    }
    const std::int64_t top = *std::max_element(grid->numerators.begin(), grid->numerators.end());
    const auto n = static_cast<std::int64_t>(x.size());
    if (top > 0 && n > max_cells / top) {
        throw CapabilityError("exact ball probability would need " + std::to_string(n) + " x " +
                              std::to_string(top) + " cells (limit " + std::to_string(max_cells) +
                              "); use the Monte Carlo estimate instead");
    }
    const std::size_t K = rho.K();
    SumLaw law;
    law.denominator = grid->denominator;
    law.atoms = {{0, 1.0}};
    std::vector<std::pair<std::int64_t, double>> next;
    for (Symbol s : x) {
        const auto j = static_cast<std::size_t>(s);
        const auto& r = law_of.at(j);
        next.clear();
        next.reserve(law.atoms.size() * K);
        for (std::size_t k = 0; k < K; ++k) {
            if (r[k] <= 0.0) continue;
            const std::int64_t shift = grid->numerators[j * K + k];
            for (const auto& [key, p] : law.atoms) next.emplace_back(key + shift, p * r[k]);
        }
        std::sort(next.begin(), next.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        law.atoms.clear();
        for (const auto& atom : next) {
            if (!law.atoms.empty() && law.atoms.back().first == atom.first) {
                law.atoms.back().second += atom.second;
            } else {
                law.atoms.push_back(atom);
            }
        }
    }
    return law;
}

std::int64_t grid_limit(double threshold, std::int64_t n, std::int64_t denominator) {
    constexpr std::int64_t kMax = std::numeric_limits<std::int64_t>::max();
    constexpr std::int64_t kMin = std::numeric_limits<std::int64_t>::min();
    if (std::isnan(threshold)) throw InvalidInput("threshold is NaN");
    if (std::isinf(threshold)) return threshold > 0 ? kMax : kMin;
    if (threshold == 0.0) return 0;
    int exp = 0;
    const double frac = std::frexp(threshold, &exp);  // threshold = frac * 2^exp
    const auto mant = static_cast<std::int64_t>(std::ldexp(frac, 53));
    exp -= 53;
    __int128 prod = static_cast<__int128>(mant) * n * denominator;
    if (exp >= 0) {
        if (exp > 40) return prod > 0 ? kMax : kMin;
        prod *= (static_cast<__int128>(1) << exp);
    } else {
        prod = -exp >= 126 ? (prod < 0 ? -1 : 0) : (prod >> -exp);  // floor
    }
    if (prod > kMax) return kMax;
    if (prod < kMin) return kMin;
    return static_cast<std::int64_t>(prod);
}

namespace {

std::vector<std::vector<double>> iid_laws(const Distribution& q, std::size_t J) {
    std::vector<double> m(q.mass().begin(), q.mass().end());
    return std::vector<std::vector<double>>(J, m);
}

std::vector<std::vector<double>> tilted_laws(const RDSolution& sol) {
    std::vector<std::vector<double>> laws(sol.J, std::vector<double>(sol.K));
    for (std::size_t j = 0; j < sol.J; ++j) {
        for (std::size_t k = 0; k < sol.K; ++k) laws[j][k] = sol.cond(j, k);
    }
    return laws;
}

// Enumerates B^n, calling visit(sum of rho, y) for each sequence.
template <class Visit>
void enumerate_outputs(std::span<const Symbol> x, const DistortionMeasure& rho, Visit&& visit) {
    const std::size_t K = rho.K();
    const std::size_t n = x.size();
    double count = std::pow(static_cast<double>(K), static_cast<double>(n));
    if (count > 1e6) {
        throw CapabilityError("exact evaluation needs a rational grid or K^n <= 10^6 (K^n = " +
                              std::to_string(count) + ")");
    }
    Sequence y(n, 0);
    while (true) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += rho(static_cast<std::size_t>(x[i]), static_cast<std::size_t>(y[i]));
        }
        visit(sum, y);
        std::size_t i = 0;
        while (i < n && static_cast<std::size_t>(++y[i]) == K) y[i++] = 0;
        if (i == n) break;
    }
}

double sum_tolerance(std::size_t n, const DistortionMeasure& rho) {
    return 1e-12 * static_cast<double>(n) * std::max(1.0, rho.rho_max());
}

double sequence_log_prob(std::span<const Symbol> x, const Sequence& y,
                         const std::vector<std::vector<double>>& laws) {
    double lp = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double m = laws[static_cast<std::size_t>(x[i])][static_cast<std::size_t>(y[i])];
        if (m <= 0.0) return -std::numeric_limits<double>::infinity();
        lp += std::log(m);
    }
    return lp;
}

// Exact P(sum rho(x_i, Y_i) <= n threshold) under the given per-letter laws.
double exact_ball(std::span<const Symbol> x, const DistortionMeasure& rho,
                  const std::vector<std::vector<double>>& laws, double threshold,
                  std::int64_t max_cells) {
    const auto n = static_cast<std::int64_t>(x.size());
    if (rho.grid()) {
        const SumLaw law = distortion_sum_law(x, rho, laws, max_cells);
        return law.cdf(grid_limit(threshold, n, law.denominator));
    }
    validate_sequence(x, rho.J(), "source sequence");
    const double limit = threshold * static_cast<double>(n) + sum_tolerance(x.size(), rho);
    double acc = 0.0;
    enumerate_outputs(x, rho, [&](double sum, const Sequence& y) {
        if (sum <= limit) acc += std::exp(sequence_log_prob(x, y, laws));
    });
    return std::min(acc, 1.0);
}

// Calls visit(sum_rho, probability) for every atom of the tilted sum law.
template <class Visit>
void tilted_atoms(std::span<const Symbol> x, const DistortionMeasure& rho, const RDSolution& sol,
                  Visit&& visit) {
    const auto laws = tilted_laws(sol);
    if (rho.grid()) {
        const SumLaw law = distortion_sum_law(x, rho, laws, kDefaultMaxDpCells);
        for (const auto& [key, p] : law.atoms) {
            visit(static_cast<double>(key) / static_cast<double>(law.denominator), p);
        }
        return;
    }
    enumerate_outputs(x, rho, [&](double sum, const Sequence& y) {
        const double lp = sequence_log_prob(x, y, laws);
        if (std::isfinite(lp)) visit(sum, std::exp(lp));
    });
}

double center_sum(std::span<const Symbol> x, const TiltedModel& model) {
    double acc = 0.0;
    for (Symbol s : x) acc += model.letters[static_cast<std::size_t>(s)].center;
    return acc;
}

} // namespace

double ball_prob_exact(std::span<const Symbol> x, const DistortionMeasure& rho,
                       const Distribution& q, double threshold, std::int64_t max_cells) {
    if (q.size() != rho.K()) throw InvalidInput("ball_prob_exact: q size does not match K");
    if (!rho.grid()) {
        throw CapabilityError("exact ball probability needs a distortion measure on a rational "
                              "grid; use the Monte Carlo estimate instead");
    }
    return exact_ball(x, rho, iid_laws(q, rho.J()), threshold, max_cells);
}

McEstimate ball_prob_mc(std::span<const Symbol> x, const DistortionMeasure& rho,
                        const Distribution& q, double threshold, long long trials,
                        std::uint64_t seed) {
    validate_sequence(x, rho.J(), "source sequence");
    if (q.size() != rho.K()) throw InvalidInput("ball_prob_mc: q size does not match K");
    if (trials < 1) throw InvalidInput("ball_prob_mc: trials must be at least 1");
    const std::size_t K = rho.K();
    std::vector<double> cdf(K);
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) cdf[k] = (total += q[k]);

    const auto n = static_cast<std::int64_t>(x.size());
    const auto& grid = rho.grid();
    const std::int64_t int_limit = grid ? grid_limit(threshold, n, grid->denominator) : 0;
    const double real_limit = threshold * static_cast<double>(n) + sum_tolerance(x.size(), rho);

    std::vector<char> hit(static_cast<std::size_t>(trials), 0);
    parallel_for(hit.size(), [&](std::size_t t) {
        CounterStream stream(seed, t);
        std::int64_t isum = 0;
        double rsum = 0.0;
        for (Symbol s : x) {
            const double u = stream.uniform() * total;
            auto k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            k = std::min(k, K - 1);
            while (q[k] == 0.0 && k > 0) --k;
            const auto j = static_cast<std::size_t>(s);
            if (grid) {
                isum += grid->numerators[j * K + k];
            } else {
                rsum += rho(j, k);
            }
        }
        hit[t] = grid ? (isum <= int_limit) : (rsum <= real_limit);
    });
    long long hits = 0;
    for (char h : hit) hits += h;
    McEstimate out;
    out.trials = trials;
    out.estimate = static_cast<double>(hits) / static_cast<double>(trials);
    out.standard_error =
        std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(trials));
    return out;
}

TiltedIdentity tilted_identity_check(std::span<const Symbol> x, const DistortionMeasure& rho,
                                     double d, double epsilon, RdCache& cache) {
    const NType t = type_of(x, rho.J());
    const auto sol = rd_of_type(t, d, rho, cache);
    const TiltedModel model = TiltedModel::from_solution(*sol, rho);
    const double n = static_cast<double>(x.size());

    TiltedIdentity out;
    out.lhs = exact_ball(x, rho, iid_laws(sol->output(), rho.J()), d + epsilon, kDefaultMaxDpCells);

    const double centers = center_sum(x, model);
    const double tol = sum_tolerance(x.size(), rho);
    double acc = 0.0;
    tilted_atoms(x, rho, *sol, [&](double sum, double p) {
        const double u = sum - centers;
        if (u <= epsilon * n + tol) acc += p * std::exp(-n * sol->rate + sol->lambda_star * u);
    });
    out.rhs = acc;
    out.gap = std::abs(out.lhs - out.rhs);
    return out;
}

LuckyStrike lucky_strike_bound(std::span<const Symbol> x, const DistortionMeasure& rho, double d,
                               double epsilon, double C, RdCache& cache) {
    const NType t = type_of(x, rho.J());
    const auto sol = rd_of_type(t, d, rho, cache);
    const TiltedModel model = TiltedModel::from_solution(*sol, rho);
    const double n = static_cast<double>(x.size());
    const double centers = center_sum(x, model);
    const double tol = sum_tolerance(x.size(), rho);

    LuckyStrike out;
    tilted_atoms(x, rho, *sol, [&](double sum, double p) {
        const double u = sum - centers;
        if (u >= -C - tol && u <= epsilon * n + tol) out.probability += p;
    });
    out.probability = std::min(out.probability, 1.0);
    out.bound = std::exp(-n * sol->rate - C * sol->lambda_star) * out.probability;
    out.ball = exact_ball(x, rho, iid_laws(sol->output(), rho.J()), d + epsilon, kDefaultMaxDpCells);
    return out;
}

double berry_esseen_xi(int n, double rho_max, const BerryEsseenParams& params) {
    const double C1 = params.C1 > 0.0 ? params.C1 : 2.0 * rho_max;
    const double C2 = params.C2 > 0.0 ? params.C2 : 2.5 * rho_max * rho_max;
    const double a = params.alpha;
    const double nn = static_cast<double>(n);
    const double chebyshev = 1.0 - C2 / (C1 * C1);
    const double normal = C1 / (std::sqrt(2.0 * std::numbers::pi) * std::pow(nn, a - 0.5) * rho_max) -
                          2.0 * params.C0 * std::pow(rho_max, 3) /
                              (std::pow(C2, 1.5) * std::pow(nn, 2.0 - 3.0 * a));
    return std::min(chebyshev, normal);
}

LemmaBounds lemma_bounds(const NType& t, const DistortionMeasure& rho, double d,
                         const BerryEsseenParams& params, RdCache& cache) {
    const int n = t.n();
    const double rmax = rho.rho_max();
    const double C1 = params.C1 > 0.0 ? params.C1 : 2.0 * rmax;
    const double a = params.alpha;
    if (!(a > 0.5)) throw InvalidInput("lemma_bounds: alpha must exceed 1/2");
    const double n_min = std::pow(C1 * C1 / (3.0 * rmax * rmax), 1.0 / (2.0 * a - 1.0));
    if (static_cast<double>(n) < n_min) {
        throw InvalidInput("lemma_bounds: blocklength condition n >= (C1^2/(3 rho_max^2))^{1/(2 alpha-1)} = " +
                           std::to_string(n_min) + " violated by n = " + std::to_string(n));
    }
    if (n < 10) {
        throw InvalidInput("lemma_bounds: the 2 rho_max / n^{5/8} slack bound requires n >= 10 (n = " +
                           std::to_string(n) + ")");
    }
    const auto sol = rd_of_type(t, d, rho, cache);
    const double nn = static_cast<double>(n);

    LemmaBounds out;
    out.n = n;
    out.rate = sol->rate;
    out.lambda_star = sol->lambda_star;
    out.threshold = d + C1 / std::pow(nn, a);
    out.xi = berry_esseen_xi(n, rmax, params);
    out.concentration = std::exp(-nn * sol->rate - C1 * sol->lambda_star * std::pow(nn, 1.0 - a)) *
                        std::max(out.xi, 0.0);
    out.lemma4 = std::exp(-nn * sol->rate - 2.0 * rmax * sol->lambda_star * std::pow(nn, 0.375) -
                          std::log(nn) / 8.0 + std::log(0.5));
    out.uniform_ratio = uniform_ratio_bound(n, rho.J(), rho.K(), d, rmax);
    return out;
}

double uniform_ratio_bound(int n, std::size_t J, std::size_t K, double d, double rho_max) {
    const double nn = static_cast<double>(n);
    const double m = std::min(std::log(static_cast<double>(J)), std::log(static_cast<double>(K)));
    return std::exp(-2.0 * rho_max * m * std::pow(nn, 0.375) / d - std::log(nn) / 8.0 +
                    std::log(0.5));
}

DistortionMeasure counterexample_measure(double delta) {
    if (!(delta > 0.0)) throw InvalidInput("counterexample: delta must be positive");
    const double rho_max = std::max(3.0, 1.0 + delta);
    std::vector<double> e{0.0, 3.0, 1.0 + delta, 3.0, 0.0, 1.0 + delta};
    DistortionMeasure rho(2, 3, e, rho_max);
    for (std::int64_t den = 1; den <= RationalGrid::kMaxDenominator; den *= 10) {
        const double scaled = delta * static_cast<double>(den);
        if (std::abs(scaled - std::round(scaled)) <= 1e-9 * std::max(1.0, scaled)) {
            const auto dn = static_cast<std::int64_t>(std::llround(scaled));
            return DistortionMeasure::from_grid(2, 3, {0, 3 * den, den + dn, 3 * den, 0, den + dn},
                                                den, rho_max);
        }
    }
    return rho;
}

CounterexampleResult counterexample_ratio(int n, double delta, long long mc_trials,
                                          std::uint64_t seed) {
    if (n < 2 || n % 2 != 0) throw InvalidInput("counterexample: n must be a positive even integer");
    const DistortionMeasure rho = counterexample_measure(delta);
    Sequence x(static_cast<std::size_t>(n), 0);
    std::fill(x.begin() + n / 2, x.end(), 1);
    const NType t = type_of(x, 2);
    const auto sol = rd_of_type(t, 1.0, rho);

    CounterexampleResult out;
    out.rate = sol->rate;
    out.lambda_star = sol->lambda_star;
    if (rho.grid()) {
        out.probability = ball_prob_exact(x, rho, sol->output(), 1.0);
    } else {
        const McEstimate mc = ball_prob_mc(x, rho, sol->output(), 1.0, mc_trials, seed);
        out.probability = mc.estimate;
        out.standard_error = mc.standard_error * std::exp(n * sol->rate);
        out.exact = false;
    }
    out.ratio = out.probability * std::exp(n * sol->rate);
    return out;
}

double counterexample_union_bound(int n, double delta, double eps1) {
    const double s = std::sqrt(4.0 * eps1);
    return n / 2.0 * (2.0 * s + s * (8.0 + 2.0 * delta));
}

} // namespace nmlrd

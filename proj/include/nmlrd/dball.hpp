#pragma once

#include "nmlrd/core_model.hpp"
#include "nmlrd/rd_solver.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace nmlrd {

inline constexpr std::int64_t kDefaultMaxDpCells = 100'000'000;

/// Per-source-letter law of rho(j, Y~) with Y~ ~ Q*(.|j), centered at
/// d_j = sum_k Q*(k|j) rho(j,k).
struct TiltedLetter {
    std::vector<double> values;  ///< rho(j, k), k = 0..K-1
    std::vector<double> masses;  ///< Q*(k|j)
    double center = 0.0;         ///< d_j
};

struct TiltedModel {
    std::vector<TiltedLetter> letters;
    double lambda_star = 0.0;
    double rate = 0.0;

    static TiltedModel from_solution(const RDSolution& sol, const DistortionMeasure& rho);
    /// E[U] for letter j; zero up to rounding.
    [[nodiscard]] double centered_mean(std::size_t j) const;
};

/// Exact law of sum_i rho(x_i, Y_i) * denominator for independent Y_i with
/// letter-dependent laws, as sorted (integer sum, probability) atoms.
struct SumLaw {
    std::int64_t denominator = 1;
    std::vector<std::pair<std::int64_t, double>> atoms;

    /// P(sum <= limit) with limit an integer on the grid.
    [[nodiscard]] double cdf(std::int64_t limit) const;
};

/// `law_of(j)` gives the K masses used at positions where x_i = j. Requires
/// the grid of rho; throws CapabilityError without one or if
/// n * max numerator exceeds max_cells.
SumLaw distortion_sum_law(std::span<const Symbol> x, const DistortionMeasure& rho,
                          const std::vector<std::vector<double>>& law_of,
                          std::int64_t max_cells = kDefaultMaxDpCells);

/// floor(threshold * n * denominator) computed exactly from the binary value
/// of threshold, saturated to the int64 range.
std::int64_t grid_limit(double threshold, std::int64_t n, std::int64_t denominator);

/// P(rho_n(x, Y) <= threshold) for Y i.i.d. q, exact on the rational grid.
double ball_prob_exact(std::span<const Symbol> x, const DistortionMeasure& rho,
                       const Distribution& q, double threshold,
                       std::int64_t max_cells = kDefaultMaxDpCells);

struct McEstimate {
    double estimate = 0.0;
    double standard_error = 0.0;
    long long trials = 0;
};

McEstimate ball_prob_mc(std::span<const Symbol> x, const DistortionMeasure& rho,
                        const Distribution& q, double threshold, long long trials,
                        std::uint64_t seed);

struct TiltedIdentity {
    double lhs = 0.0;  ///< P(rho_n(x,Y) <= d + eps), Y i.i.d. Q^{t,d,rho}
    double rhs = 0.0;  ///< e^{-nR} E[exp(l* sum U) 1(sum U <= eps n)]
    double gap = 0.0;
};

/// Both sides exact: by grid DP when rho carries a grid, otherwise by
/// enumerating B^n (requires K^n <= 10^6).
TiltedIdentity tilted_identity_check(std::span<const Symbol> x, const DistortionMeasure& rho,
                                     double d, double epsilon,
                                     RdCache& cache = default_rd_cache());

/// Lucky-strike bound exp(-nR - C l*) P(-C <= sum U <= eps n), with the
/// probability computed exactly.
struct LuckyStrike {
    double bound = 0.0;
    double probability = 0.0;  ///< P(-C <= sum U <= eps n)
    double ball = 0.0;         ///< P(rho_n(x,Y) <= d + eps), exact
};
LuckyStrike lucky_strike_bound(std::span<const Symbol> x, const DistortionMeasure& rho, double d,
                               double epsilon, double C, RdCache& cache = default_rd_cache());

struct BerryEsseenParams {
    double alpha = 0.625;
    double C1 = 0.0;   ///< 0 selects 2 rho_max
    double C2 = 0.0;   ///< 0 selects 2.5 rho_max^2
    double C0 = 0.56;  ///< Berry-Esseen constant
};

/// xi(C1, C2, alpha) at blocklength n.
double berry_esseen_xi(int n, double rho_max, const BerryEsseenParams& params);

struct LemmaBounds {
    int n = 0;
    double rate = 0.0;
    double lambda_star = 0.0;
    double threshold = 0.0;      ///< d + C1 / n^alpha
    double xi = 0.0;
    double concentration = 0.0;  ///< exp(-nR - C1 l* n^{1-alpha}) xi
    double lemma4 = 0.0;         ///< exp(-nR - 2 rho_max l* n^{3/8} - ln(n)/8 + ln(1/2))
    double uniform_ratio = 0.0;  ///< exp(-2 rho_max min(ln J, ln K) n^{3/8}/d - ln(n)/8 + ln(1/2))
};

/// Evaluates the concentration bounds for the type t from its RD certificate.
/// Throws InvalidInput naming the violated blocklength condition.
LemmaBounds lemma_bounds(const NType& t, const DistortionMeasure& rho, double d,
                         const BerryEsseenParams& params = {},
                         RdCache& cache = default_rd_cache());

/// Right-hand side of the uniform ratio bound
/// P(ball at d + 2 rho_max/n^{5/8}) / e^{-nR} >= ...
double uniform_ratio_bound(int n, std::size_t J, std::size_t K, double d, double rho_max);

/// [[0, 3, 1+delta], [3, 0, 1+delta]] with rho_max = 3, on the decimal grid
/// that represents delta.
DistortionMeasure counterexample_measure(double delta);

struct CounterexampleResult {
    double ratio = 0.0;        ///< P(rho_n(x,Y) <= 1) / e^{-nR}
    double probability = 0.0;
    double rate = 0.0;
    double lambda_star = 0.0;
    bool exact = true;
    double standard_error = 0.0;
};

/// x = n/2 zeros then n/2 ones, d = 1.
CounterexampleResult counterexample_ratio(int n, double delta, long long mc_trials = 1'000'000,
                                          std::uint64_t seed = 1);

/// (n/2)(2 sqrt(4 eps1) + sqrt(4 eps1)(8 + 2 delta)).
double counterexample_union_bound(int n, double delta, double eps1);

} // namespace nmlrd

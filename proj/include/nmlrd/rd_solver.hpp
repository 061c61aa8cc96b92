#pragma once

#include "nmlrd/core_model.hpp"
#include "nmlrd/errors.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace nmlrd {

/// The four components of the Lagrangian certificate check.
struct KktResiduals {
    double tilted_form = 0.0;      ///< |Q*(k|j) - Q(k)e^{-l rho}/c_j|
    double fixed_point = 0.0;      ///< sum_j t_j e^{-l rho}/c_j: =1 on supp Q, <=1 off
    double slackness = 0.0;        ///< |l (D - d)|
    double rate_formula = 0.0;     ///< |I(t,Q*) - (-l d - sum_j t_j ln c_j)|

    [[nodiscard]] double max() const;
};

/// Rate-distortion function value plus its Lagrangian certificate.
struct RDSolution {
    double rate = 0.0;                ///< nats
    double lambda_star = 0.0;         ///< nats per distortion unit (larger bracket end)
    double lambda_lower = 0.0;        ///< other end of the final multiplier bracket
    std::size_t J = 0;
    std::size_t K = 0;
    std::vector<double> q_cond;       ///< J*K row-major Q*(k|j)
    std::vector<double> q_out;        ///< output law on B
    double achieved_distortion = 0.0;
    double kkt_residual = 0.0;
    KktResiduals residuals;
    bool zero_rate = false;
    int outer_iterations = 0;
    long long inner_iterations = 0;

    [[nodiscard]] double cond(std::size_t j, std::size_t k) const { return q_cond[j * K + k]; }
    [[nodiscard]] Distribution output() const { return Distribution(q_out); }
};

struct SolverOptions {
    double tol = 1e-10;
    int max_inner = 100'000;
    int max_outer = 200;
};

/// Raised when the iteration caps are hit; carries the best iterate.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, RDSolution best)
        : Error(what), best_(std::move(best)) {}
    [[nodiscard]] const RDSolution& best() const noexcept { return best_; }

private:
    RDSolution best_;
};

/// min_k sum_j p(j) rho(j,k): the smallest d with zero rate.
double zero_rate_distortion(const Distribution& p, const DistortionMeasure& rho);

/// I(p, W) in nats for a J*K row-major conditional W.
double mutual_information(const Distribution& p, std::span<const double> cond, std::size_t K);

/// R(p, d, rho) with multiplier, optimal conditional and output law.
///
/// For fixed multiplier the alternating (Blahut-type) updates are run to a
/// fixed point; the multiplier is bisected on [0, min(ln J, ln K)/d] until the
/// achieved distortion brackets d, and the two bracket solutions are mixed so
/// the distortion constraint holds with equality.
RDSolution solve_rd(const Distribution& p, double d, const DistortionMeasure& rho,
                    const SolverOptions& options = {});

/// Thread-safe memo table for per-type solutions keyed by (counts, d, rho).
class RdCache {
public:
    std::shared_ptr<const RDSolution> find_or_solve(const NType& t, double d,
                                                    const DistortionMeasure& rho,
                                                    const SolverOptions& options);
    [[nodiscard]] std::size_t size() const;
    void clear();

private:
    struct Key {
        std::vector<int> counts;
        std::uint64_t d_bits;
        std::uint64_t rho_digest;
        auto operator<=>(const Key&) const = default;
    };
    mutable std::mutex mutex_;
    std::map<Key, std::shared_ptr<const RDSolution>> table_;
};

RdCache& default_rd_cache();

/// solve_rd on the empirical distribution t/n, memoized.
std::shared_ptr<const RDSolution> rd_of_type(const NType& t, double d,
                                             const DistortionMeasure& rho,
                                             RdCache& cache = default_rd_cache(),
                                             const SolverOptions& options = {});

} // namespace nmlrd

#pragma once

#include "nmlrd/core_model.hpp"
#include "nmlrd/rd_solver.hpp"
#include "nmlrd/rng.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace nmlrd {

inline constexpr std::size_t kDefaultTypeLimit = 10'000'000;

/// All n-types over an alphabet of size J with their log class sizes.
struct TypeTable {
    int n = 0;
    std::size_t J = 0;
    std::vector<NType> types;       ///< first count descending, then the next, ...
    std::vector<double> log_sizes;  ///< ln |T(t)| in nats

    [[nodiscard]] std::size_t size() const noexcept { return types.size(); }
};

/// C(n+J-1, J-1), saturating at UINT64_MAX.
std::uint64_t type_count(int n, std::size_t J);

/// ln of the multinomial coefficient n! / prod_j counts_j!.
double log_multinomial(std::span<const int> counts);

/// Throws ResourceLimit if the table would exceed `limit` entries.
TypeTable enumerate_types(int n, std::size_t J, std::size_t limit = kDefaultTypeLimit);

/// ln p^n(T(t)); -infinity when t charges a letter p does not.
double type_class_log_prob(const NType& t, const Distribution& p);

/// Visits the n-types with ln p^n(T(t)) >= log_threshold in enumeration
/// order. Whole subtrees are skipped as soon as the probability of their
/// common prefix counts falls below the threshold; the skipped mass is
/// returned (exact up to rounding).
double visit_types(int n, const Distribution& p, double log_threshold,
                   const std::function<void(const NType&, double log_prob)>& visit);

struct ExpectedRdOptions {
    int max_exact_J = 4;           ///< exact summation for J <= this (J = 2 always exact)
    int max_exact_n = 2000;        ///< ... and n <= this
    double log_prob_floor = -50.0; ///< types below this log-probability are skipped
    long long mc_samples = 20'000;
    std::uint64_t seed = 1;
    bool force_monte_carlo = false;
    RdCache* cache = nullptr;      ///< defaults to the shared cache
    SolverOptions solver;
};

struct ExpectedRd {
    double value = 0.0;            ///< nats
    double standard_error = 0.0;   ///< 0 for exact summation
    bool exact = true;
    double truncated_mass = 0.0;   ///< probability of the skipped types
    std::size_t types_evaluated = 0;
};

/// E_p[R(T, d, rho)] over the random type T of an i.i.d. p sample of length n.
ExpectedRd expected_rd(const Distribution& p, double d, const DistortionMeasure& rho, int n,
                       const ExpectedRdOptions& options = {});

struct TailMass {
    double mass = 0.0;   ///< P(||T - p||_2 > a sqrt(ln n / n))
    double bound = 0.0;  ///< e^{J-1} / n^2
    [[nodiscard]] bool holds() const noexcept { return mass <= bound; }
};

/// Requires a >= sqrt(2 + 2J) and n >= 2.
TailMass tail_mass_outside_ball(const Distribution& p, int n, double a);

/// Draws a uniformly random member of a type class one position at a time
/// (sequential urn without replacement), so callers may stop early.
class TypeClassWalker {
public:
    TypeClassWalker(const NType& t, CounterStream& stream);

    [[nodiscard]] bool done() const noexcept { return left_ == 0; }
    Symbol next();

private:
    std::vector<int> remaining_;
    std::uint64_t left_;
    CounterStream& stream_;
};

/// Uniformly random arrangement of the multiset described by t.
Sequence sample_uniform_from_type_class(const NType& t, CounterStream& stream);

} // namespace nmlrd

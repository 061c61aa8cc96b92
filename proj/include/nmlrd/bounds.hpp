#pragma once

#include "nmlrd/core_model.hpp"
#include "nmlrd/intcode.hpp"
#include "nmlrd/rd_solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nmlrd {

/// One checked inequality. `satisfied` means the stated direction holds
/// within `tolerance`; slack is the signed margin in the direction of the
/// inequality (nonnegative when satisfied).
struct BoundReport {
    enum class Direction { bound_at_most, bound_at_least };

    std::string name;
    int n = 0;
    std::string inputs;  ///< compact description of the evaluated instance
    double bound_value = 0.0;
    double compared_quantity = 0.0;
    Direction direction = Direction::bound_at_most;
    double tolerance = 0.0;
    bool satisfied = false;
    double slack = 0.0;
    bool asserted = true;  ///< false for rows that only report a trend

    static BoundReport check(std::string name, int n, std::string inputs, double bound,
                             double compared, Direction direction, double tolerance = 0.0);
};

enum class Theorem { one = 1, two = 2, three = 3, four = 4 };

struct Envelope {
    double value = 0.0;    ///< sum of the evaluated terms, nats/symbol
    double leading = 0.0;  ///< 2 rho_max ln n / (d n^{5/8})
    bool complete = true;  ///< false when a constant or O(1/n) term is left out
    std::string omitted;
};

/// ln(Gamma(1/2)^K / ((2 pi)^{(K-1)/2} Gamma(K/2))) + 2 ln 2.
double v1_constant(std::size_t K);
/// 1 + ln(J^2 K^2 + J - 1) / ln ln n, n >= 3.
double gamma_n(int n, std::size_t J, std::size_t K);

/// Right-hand side of the redundancy theorem; the unspecified constant of
/// theorems two and four enters only when supplied.
Envelope thm_envelope(Theorem which, int n, std::size_t J, std::size_t K, double d,
                      double rho_max, std::optional<double> constant_g = std::nullopt);

/// Amount by which any d-semifaithful code's rate may fall below
/// E_p[R(T,d,rho)] at blocklength n.
double converse_floor(CoderKind kind, int n, std::size_t J, std::size_t K);

/// 7 rho_max/rho_min x ln(JK/x) + ln(K) e^{J-1}/n^2 with
/// x = a sqrt(J) sqrt(ln n / n). Throws InvalidInput naming each violated
/// condition (a >= sqrt(2J+2), x <= rho_min/(4 rho_max), x <= JK/e).
double gap_upper_bound_taylor(const DistortionMeasure& rho, int n, double a);

/// Standard normal CDF via erfc.
double normal_cdf(double x);

/// [sqrt(db(1-db)/n) ln((1-db)/db) - 1/(2n)]^+ [Phi(2)-Phi(1) - ((1-db)^2+db^2)/sqrt(n db(1-db))]^+
/// for 2 db + 3 sqrt(db(1-db)/n) < 1.
double gap_lower_bound_binary(double d_bar, int n);

struct ExactGap {
    double expected = 0.0;  ///< E_p[R(T,d,rho)]
    double rate = 0.0;      ///< R(p,d,rho)
    double gap = 0.0;       ///< expected - rate
    double truncated_mass = 0.0;
};

ExactGap exact_gap(const Distribution& p, double d, const DistortionMeasure& rho, int n,
                   RdCache& cache = default_rd_cache());

struct RestrictedFamilyGap {
    double p1 = 0.0;              ///< d_bar + 1/n
    ExactGap exact;
    double analytic_lower = 0.0;  ///< closed-form lower expression for the gap
    double rate_ceiling = 0.0;    ///< (1/n) ln((1 - d_bar)/d_bar)
};

/// Binary Hamming source p_n = Bern(d_bar + 1/n) at d = d_bar.
RestrictedFamilyGap restricted_family_gap(double d_bar, int n);

struct ModcontRow {
    int n = 0;
    double sup_gap = 0.0;
    double argmax_p1 = 0.0;
};

/// max over p(1) on a grid of step `step` of |E_p[R(T,d,rho)] - R(p,d,rho)|
/// for a binary source (rho.J() == 2).
std::vector<ModcontRow> modcont_probe(const DistortionMeasure& rho, double d,
                                      const std::vector<int>& schedule, double step = 0.01,
                                      RdCache& cache = default_rd_cache());

} // namespace nmlrd

#include "nmlrd/bounds.hpp"

#include "nmlrd/errors.hpp"
#include "nmlrd/parallel.hpp"
#include "nmlrd/type_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace nmlrd {

BoundReport BoundReport::check(std::string name, int n, std::string inputs, double bound,
                               double compared, Direction direction, double tolerance) {
    BoundReport r;
    r.name = std::move(name);
    r.n = n;
    r.inputs = std::move(inputs);
    r.bound_value = bound;
    r.compared_quantity = compared;
    r.direction = direction;
    r.tolerance = tolerance;
    r.slack = direction == Direction::bound_at_most ? compared - bound : bound - compared;
    r.satisfied = r.slack >= -tolerance;
    return r;
}

double v1_constant(std::size_t K) {
    const auto k = static_cast<double>(K);
    return k * std::lgamma(0.5) - (k - 1.0) / 2.0 * std::log(2.0 * std::numbers::pi) -
           std::lgamma(k / 2.0) + 2.0 * std::numbers::ln2;
}

double gamma_n(int n, std::size_t J, std::size_t K) {
    if (n < 3) throw InvalidInput("gamma_n: needs n >= 3 so that ln ln n > 0");
    const auto j = static_cast<double>(J);
    const auto k = static_cast<double>(K);
    return 1.0 + std::log(j * j * k * k + j - 1.0) / std::log(std::log(static_cast<double>(n)));
}

Envelope thm_envelope(Theorem which, int n, std::size_t J, std::size_t K, double d,
                      double rho_max, std::optional<double> constant_g) {
    if (n < 1) throw InvalidInput("thm_envelope: n must be at least 1");
    if (!(d > 0.0)) throw InvalidInput("thm_envelope: d must be positive");
    const double nn = static_cast<double>(n);
    const double ln_n = std::log(nn);
    const double m = std::min(std::log(static_cast<double>(K)), std::log(static_cast<double>(J)));
    const double root = std::pow(nn, 0.625);
    const auto k = static_cast<double>(K);

    Envelope e;
    e.leading = 2.0 * rho_max * ln_n / (d * root);
    e.value = e.leading + 4.0 * rho_max * (m + std::numbers::ln2) / (d * root);
    auto loglog_term = [&](double coefficient) {
        return n >= 2 ? coefficient * std::log(ln_n) / nn : 0.0;
    };
    switch (which) {
    case Theorem::one:
        e.value += (k + 1.25) / 2.0 * ln_n / nn + (v1_constant(K) + std::log(8.0)) / nn + m / nn;
        break;
    case Theorem::two:
        e.value += (k + 5.25) / 2.0 * ln_n / nn + m / nn + std::log(4.0) / nn;
        if (constant_g) {
            e.value += loglog_term(*constant_g);
        } else {
            e.complete = false;
            e.omitted = "G ln ln n / n";
        }
        break;
    case Theorem::three: {
        if (n < 2) throw InvalidInput("thm_envelope: theorem three needs n >= 2");
        const auto j = static_cast<double>(J);
        // gamma_n ln ln n = ln ln n + ln(J^2 K^2 + J - 1)
        e.value += (k + 1.25) / 2.0 * ln_n / nn +
                   (std::log(ln_n) + std::log(j * j * k * k + j - 1.0)) / nn;
        e.complete = false;
        e.omitted = "O(1/n)";
        break;
    }
    case Theorem::four:
        e.value += (k + 5.25) / 2.0 * ln_n / nn;
        e.complete = false;
        if (constant_g) {
            e.value += loglog_term(*constant_g);
            e.omitted = "O(1/n)";
        } else {
            e.omitted = "G ln ln n / n; O(1/n)";
        }
        break;
    }
    return e;
}

double converse_floor(CoderKind kind, int n, std::size_t J, std::size_t K) {
    if (n < 1) throw InvalidInput("converse_floor: n must be at least 1");
    const double nn = static_cast<double>(n);
    const double c = static_cast<double>(J * K + J) - 2.0;
    const double prefix = c * (std::log(nn) + 1.0) / nn;
    if (kind == CoderKind::prefix) return prefix;
    const double ln_k = std::log(static_cast<double>(K));
    if (!(ln_k > 0.0) || !(nn > 1.0 / ln_k)) {
        throw InvalidInput("converse_floor: the non-prefix floor requires n > 1/ln K");
    }
    return prefix + ln_k * std::log1p(1.0 / (nn * ln_k)) + std::log(nn) / nn +
           std::log(2.0 * ln_k) / nn;
}

double gap_upper_bound_taylor(const DistortionMeasure& rho, int n, double a) {
    const auto J = static_cast<double>(rho.J());
    const auto K = static_cast<double>(rho.K());
    if (n < 2) throw InvalidInput("gap_upper_bound_taylor: n must be at least 2");
    if (!(a >= std::sqrt(2.0 * J + 2.0))) {
        throw InvalidInput("gap_upper_bound_taylor: radius factor a must be at least sqrt(2J+2) = " +
                           std::to_string(std::sqrt(2.0 * J + 2.0)));
    }
    if (!(rho.rho_min() > 0.0)) {
        throw InvalidInput("gap_upper_bound_taylor: distortion measure has no positive entry");
    }
    const double nn = static_cast<double>(n);
    const double x = a * std::sqrt(J) * std::sqrt(std::log(nn) / nn);
    const double ratio = rho.rho_max() / rho.rho_min();
    if (x > 1.0 / (4.0 * ratio)) {
        throw InvalidInput("gap_upper_bound_taylor: n too small, a sqrt(J) sqrt(ln n/n) = " +
                           std::to_string(x) + " exceeds rho_min/(4 rho_max) = " +
                           std::to_string(1.0 / (4.0 * ratio)));
    }
    if (x > J * K / std::numbers::e) {
        throw InvalidInput("gap_upper_bound_taylor: n too small, a sqrt(J) sqrt(ln n/n) exceeds JK/e");
    }
    return 7.0 * ratio * x * std::log(J * K / x) + std::log(K) * std::exp(J - 1.0) / (nn * nn);
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double gap_lower_bound_binary(double d_bar, int n) {
    if (!(d_bar > 0.0 && d_bar < 0.5)) {
        throw InvalidInput("gap_lower_bound_binary: d_bar must lie in (0, 1/2)");
    }
    if (n < 1) throw InvalidInput("gap_lower_bound_binary: n must be at least 1");
    const double nn = static_cast<double>(n);
    const double v = d_bar * (1.0 - d_bar);
    if (!(2.0 * d_bar + 3.0 * std::sqrt(v / nn) < 1.0)) {
        throw InvalidInput("gap_lower_bound_binary: condition 2 d_bar + 3 sqrt(d_bar(1-d_bar)/n) < 1 fails");
    }
    const double first = std::sqrt(v / nn) * std::log((1.0 - d_bar) / d_bar) - 0.5 / nn;
    const double second = normal_cdf(2.0) - normal_cdf(1.0) -
                          ((1.0 - d_bar) * (1.0 - d_bar) + d_bar * d_bar) / std::sqrt(nn * v);
    return std::max(first, 0.0) * std::max(second, 0.0);
}

ExactGap exact_gap(const Distribution& p, double d, const DistortionMeasure& rho, int n,
                   RdCache& cache) {
    ExpectedRdOptions opt;
    opt.cache = &cache;
    const ExpectedRd e = expected_rd(p, d, rho, n, opt);
    if (!e.exact) throw CapabilityError("exact_gap: exact type summation infeasible for these sizes");
    ExactGap g;
    g.expected = e.value;
    g.rate = solve_rd(p, d, rho).rate;
    g.gap = g.expected - g.rate;
    g.truncated_mass = e.truncated_mass;
    return g;
}

RestrictedFamilyGap restricted_family_gap(double d_bar, int n) {
    if (!(d_bar > 0.0 && d_bar < 0.5)) {
        throw InvalidInput("restricted_family_gap: d_bar must lie in (0, 1/2)");
    }
    const double nn = static_cast<double>(n);
    RestrictedFamilyGap r;
    r.p1 = d_bar + 1.0 / nn;
    if (!(r.p1 < 0.5)) throw InvalidInput("restricted_family_gap: n too small, d_bar + 1/n >= 1/2");
    const DistortionMeasure rho = DistortionMeasure::hamming(2);
    r.exact = exact_gap(Distribution::bernoulli(r.p1), d_bar, rho, n);
    const double lr = std::log((1.0 - d_bar) / d_bar);
    const double spread = 1.0 / nn + std::sqrt(r.p1 * (1.0 - r.p1) / nn);
    r.analytic_lower = 0.1 * (1.0 / nn + std::sqrt(d_bar * (1.0 - d_bar) / nn)) * lr -
                       spread * spread / (20.0 * d_bar * (1.0 - d_bar)) - r.exact.rate;
    r.rate_ceiling = lr / nn;
    return r;
}

std::vector<ModcontRow> modcont_probe(const DistortionMeasure& rho, double d,
                                      const std::vector<int>& schedule, double step,
                                      RdCache& cache) {
    if (rho.J() != 2) throw InvalidInput("modcont_probe: requires a binary source alphabet");
    if (!(step > 0.0 && step <= 1.0)) throw InvalidInput("modcont_probe: grid step must lie in (0, 1]");
    const auto points = static_cast<std::size_t>(std::llround(1.0 / step)) + 1;
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i) grid[i] = std::min(1.0, static_cast<double>(i) * step);

    std::vector<double> rates(points);
    for (std::size_t i = 0; i < points; ++i) {
        rates[i] = solve_rd(Distribution::bernoulli(grid[i]), d, rho).rate;
    }
    std::vector<ModcontRow> rows;
    for (int n : schedule) {
        ModcontRow row;
        row.n = n;
        for (std::size_t i = 0; i < points; ++i) {
            ExpectedRdOptions opt;
            opt.cache = &cache;
            const double e = expected_rd(Distribution::bernoulli(grid[i]), d, rho, n, opt).value;
            const double gap = std::abs(e - rates[i]);
            if (gap > row.sup_gap) {
                row.sup_gap = gap;
                row.argmax_p1 = grid[i];
            }
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace nmlrd

#include "nmlrd/rd_solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

namespace nmlrd {

double KktResiduals::max() const {
    return std::max({tilted_form, fixed_point, slackness, rate_formula});
}

double zero_rate_distortion(const Distribution& p, const DistortionMeasure& rho) {
    if (p.size() != rho.J()) {
        throw InvalidInput("zero_rate_distortion: distribution size " + std::to_string(p.size()) +
                           " does not match J = " + std::to_string(rho.J()));
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rho.K(); ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < rho.J(); ++j) s += p[j] * rho(j, k);
        best = std::min(best, s);
    }
    return best;
}

double mutual_information(const Distribution& p, std::span<const double> cond, std::size_t K) {
    const std::size_t J = p.size();
    std::vector<double> out(K, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t k = 0; k < K; ++k) out[k] += p[j] * cond[j * K + k];
    }
    double info = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
        if (p[j] == 0.0) continue;
        for (std::size_t k = 0; k < K; ++k) {
            const double w = cond[j * K + k];
            if (w > 0.0) info += p[j] * w * std::log(w / out[k]);
        }
    }
    return std::max(0.0, info);
}

namespace {

// Problem restricted to the positive-mass source letters.
struct Restricted {
    std::vector<std::size_t> letters;  // original indices
    std::vector<double> t;             // their masses
    std::size_t K = 0;
    std::vector<double> rho;           // |letters| x K
};

struct FixedLambda {
    double lambda = 0.0;
    std::vector<double> q;     // output law
    std::vector<double> cond;  // |letters| x K
    double distortion = 0.0;
    long long iterations = 0;
    bool converged = false;
};

double objective(const Restricted& pr, const std::vector<double>& w, const std::vector<double>& q) {
    const std::size_t K = pr.K;
    double val = 0.0, mass = 0.0;
    for (double v : q) mass += v;
    for (std::size_t s = 0; s < pr.letters.size(); ++s) {
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) acc += q[k] * w[s * K + k];
        if (!(acc > 0.0)) return -std::numeric_limits<double>::infinity();
        val += pr.t[s] * std::log(acc);
    }
    return val - mass;
}

// Maximizes sum_j t_j ln (Q w)_j - sum_k Q_k over Q >= 0 by Newton steps on
// an active set. The maximizer sums to one and satisfies the fixed-point
// conditions exactly, which the alternating updates reach only slowly near
// degenerate multipliers. Returns false if it fails to certify optimality.
bool newton_polish(const Restricted& pr, const std::vector<double>& w, std::vector<double>& q,
                   double tol) {
    const std::size_t S = pr.letters.size();
    const std::size_t K = pr.K;
    std::vector<double> trial(K), c(S), ratio(K);

    auto ratios = [&](const std::vector<double>& qq) {
        for (std::size_t s = 0; s < S; ++s) {
            double acc = 0.0;
            for (std::size_t k = 0; k < K; ++k) acc += qq[k] * w[s * K + k];
            c[s] = acc;
        }
        std::fill(ratio.begin(), ratio.end(), 0.0);
        for (std::size_t s = 0; s < S; ++s) {
            for (std::size_t k = 0; k < K; ++k) ratio[k] += pr.t[s] * w[s * K + k] / c[s];
        }
    };

    const double floor = 1e-10 * *std::max_element(q.begin(), q.end());
    std::vector<char> active(K);
    for (std::size_t k = 0; k < K; ++k) active[k] = q[k] > floor;
    for (std::size_t k = 0; k < K; ++k) {
        if (!active[k]) q[k] = 0.0;
    }

    const int max_rounds = 4 * static_cast<int>(K) + 8;
    for (int round = 0; round < max_rounds; ++round) {
        std::vector<std::size_t> idx;
        for (std::size_t k = 0; k < K; ++k) {
            if (active[k]) idx.push_back(k);
        }
        const auto m = static_cast<Eigen::Index>(idx.size());
        bool dropped = false;
        for (int it = 0; it < 100; ++it) {
            ratios(q);
            Eigen::VectorXd g(m);
            double gmax = 0.0;
            for (Eigen::Index a = 0; a < m; ++a) {
                g[a] = ratio[idx[a]] - 1.0;
                gmax = std::max(gmax, std::abs(g[a]));
            }
            if (gmax <= tol) break;
            Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
            for (std::size_t s = 0; s < S; ++s) {
                const double inv = pr.t[s] / (c[s] * c[s]);
                for (Eigen::Index a = 0; a < m; ++a) {
                    for (Eigen::Index b = 0; b < m; ++b) {
                        H(a, b) += inv * w[s * K + idx[a]] * w[s * K + idx[b]];
                    }
                }
            }
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(H);
            cod.setThreshold(1e-11);
            Eigen::VectorXd step = cod.solve(g);
            // A gradient component outside the range of H lies in its null
            // space, where c is unchanged and the objective grows linearly:
            // follow it until a coordinate leaves the active set.
            const Eigen::VectorXd drift = g - H * step;
            double alpha = 1.0;
            if (drift.cwiseAbs().maxCoeff() > std::max(tol, 1e-6 * gmax)) {
                step = drift;
                alpha = std::numeric_limits<double>::infinity();
            }
            Eigen::Index blocking = -1;
            for (Eigen::Index a = 0; a < m; ++a) {
                if (step[a] < 0.0 && q[idx[a]] + alpha * step[a] <= 0.0) {
                    alpha = q[idx[a]] / -step[a];
                    blocking = a;
                }
            }
            if (!std::isfinite(alpha)) return false;
            const double base = objective(pr, w, q);
            double scale = alpha;
            for (int ls = 0; ls < 60; ++ls) {
                trial = q;
                for (Eigen::Index a = 0; a < m; ++a) trial[idx[a]] += scale * step[a];
                if (blocking >= 0 && scale == alpha) trial[idx[blocking]] = 0.0;
                for (double& v : trial) v = std::max(v, 0.0);
                if (objective(pr, w, trial) >= base - 1e-15 * std::abs(base)) break;
                scale *= 0.5;
            }
            q = trial;
            if (blocking >= 0 && scale == alpha) {
                active[idx[blocking]] = 0;
                dropped = true;
                break;
            }
            if (step.cwiseAbs().maxCoeff() * scale <= 1e-17) break;
        }
        if (dropped) continue;

        ratios(q);
        bool optimal = true;
        std::size_t worst = K;
        double worst_excess = tol;
        for (std::size_t k = 0; k < K; ++k) {
            const double excess = ratio[k] - 1.0;
            if (active[k]) {
                if (std::abs(excess) > tol) optimal = false;
            } else if (excess > worst_excess) {
                worst_excess = excess;
                worst = k;
            }
        }
        if (worst < K) {
            active[worst] = 1;
            continue;
        }
        if (optimal) {
            double total = 0.0;
            for (double v : q) total += v;
            for (double& v : q) v /= total;
            return true;
        }
        return false;
    }
    return false;
}

// Alternating updates Q <- Q * sum_j t_j e^{-l rho(j,.)}/c_j for a fixed
// multiplier, started from q_init, finished by an active-set Newton polish.
FixedLambda solve_fixed_lambda(const Restricted& pr, double lambda, std::vector<double> q,
                               const SolverOptions& opt) {
    const std::size_t S = pr.letters.size();
    const std::size_t K = pr.K;
    std::vector<double> w(S * K);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(-lambda * pr.rho[i]);

    std::vector<double> c(S), ratio(K);
    FixedLambda out;
    out.lambda = lambda;
    const double stop = opt.tol / 10.0;
    const double polish_tol = opt.tol * 1e-4;
    double prev_change = std::numeric_limits<double>::infinity();
    long long next_polish = 50;
    for (long long it = 1; it <= opt.max_inner; ++it) {
        for (std::size_t s = 0; s < S; ++s) {
            double acc = 0.0;
            for (std::size_t k = 0; k < K; ++k) acc += q[k] * w[s * K + k];
            c[s] = acc;
        }
        std::fill(ratio.begin(), ratio.end(), 0.0);
        for (std::size_t s = 0; s < S; ++s) {
            const double scale = pr.t[s] / c[s];
            for (std::size_t k = 0; k < K; ++k) ratio[k] += scale * w[s * K + k];
        }
        double change = 0.0, total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double next = q[k] * ratio[k];
            change = std::max(change, std::abs(next - q[k]));
            q[k] = next;
            total += next;
        }
        for (double& v : q) v /= total;
        out.iterations = it;
        // Geometric tail estimate of the remaining distance to the fixed point.
        const double rate = prev_change > 0.0 ? std::min(change / prev_change, 0.999999) : 0.0;
        prev_change = change;
        if (change <= stop && change * rate / (1.0 - rate) <= stop) {
            out.converged = true;
        } else if (it >= next_polish || change <= 1e-6) {
            next_polish = 2 * it;
            std::vector<double> candidate = q;
            if (newton_polish(pr, w, candidate, polish_tol)) {
                q = std::move(candidate);
                out.converged = true;
            }
        }
        if (out.converged) break;
    }
    if (out.converged) {
        std::vector<double> candidate = q;
        if (newton_polish(pr, w, candidate, polish_tol)) q = std::move(candidate);
    }
    out.cond.assign(S * K, 0.0);
    out.distortion = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) acc += q[k] * w[s * K + k];
        for (std::size_t k = 0; k < K; ++k) {
            const double v = q[k] * w[s * K + k] / acc;
            out.cond[s * K + k] = v;
            out.distortion += pr.t[s] * v * pr.rho[s * K + k];
        }
    }
    out.q = std::move(q);
    return out;
}

// Expands a restricted conditional to all J rows; zero-mass rows copy the
// nearest positive-mass letter (lower index on ties).
std::vector<double> expand_rows(const Restricted& pr, std::size_t J,
                                const std::vector<double>& cond) {
    const std::size_t K = pr.K;
    std::vector<double> full(J * K, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        std::size_t best = 0;
        std::size_t best_dist = std::numeric_limits<std::size_t>::max();
        for (std::size_t s = 0; s < pr.letters.size(); ++s) {
            const std::size_t l = pr.letters[s];
            const std::size_t dist = l > j ? l - j : j - l;
            if (dist < best_dist) {
                best_dist = dist;
                best = s;
            }
        }
        std::copy_n(cond.begin() + static_cast<std::ptrdiff_t>(best * K), K,
                    full.begin() + static_cast<std::ptrdiff_t>(j * K));
    }
    return full;
}

KktResiduals certificate_residuals(const Restricted& pr, const RDSolution& sol, double d) {
    const std::size_t S = pr.letters.size();
    const std::size_t K = pr.K;
    const double lambda = sol.lambda_star;
    KktResiduals r;
    std::vector<double> c(S, 0.0), ratio(K, 0.0);
    double log_sum = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t k = 0; k < K; ++k) {
            c[s] += sol.q_out[k] * std::exp(-lambda * pr.rho[s * K + k]);
        }
        log_sum += pr.t[s] * std::log(c[s]);
        const std::size_t j = pr.letters[s];
        for (std::size_t k = 0; k < K; ++k) {
            const double e = std::exp(-lambda * pr.rho[s * K + k]);
            const double tilted = sol.q_out[k] * e / c[s];
            r.tilted_form = std::max(r.tilted_form, std::abs(sol.cond(j, k) - tilted));
            ratio[k] += pr.t[s] * e / c[s];
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        const double excess = ratio[k] - 1.0;
        r.fixed_point = std::max({r.fixed_point, excess, sol.q_out[k] * std::abs(excess)});
    }
    r.slackness = std::abs(lambda * (sol.achieved_distortion - d));
    r.rate_formula = std::abs(sol.rate - (-lambda * d - log_sum));
    return r;
}

} // namespace

RDSolution solve_rd(const Distribution& p, double d, const DistortionMeasure& rho,
                    const SolverOptions& options) {
    if (!(d > 0.0) || !std::isfinite(d)) throw InvalidInput("solve_rd: d must be positive");
    const double d_zero = zero_rate_distortion(p, rho);  // checks dimensions
    const std::size_t J = rho.J();
    const std::size_t K = rho.K();

    RDSolution sol;
    sol.J = J;
    sol.K = K;

    if (d >= d_zero) {
        std::size_t k0 = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < J; ++j) s += p[j] * rho(j, k);
            if (s < best) {
                best = s;
                k0 = k;
            }
        }
        sol.q_cond.assign(J * K, 0.0);
        for (std::size_t j = 0; j < J; ++j) sol.q_cond[j * K + k0] = 1.0;
        sol.q_out.assign(K, 0.0);
        sol.q_out[k0] = 1.0;
        sol.achieved_distortion = best;
        sol.zero_rate = true;
        return sol;
    }

    Restricted pr;
    pr.K = K;
    for (std::size_t j = 0; j < J; ++j) {
        if (p[j] > 0.0) {
            pr.letters.push_back(j);
            pr.t.push_back(p[j]);
            for (std::size_t k = 0; k < K; ++k) pr.rho.push_back(rho(j, k));
        }
    }
    const std::size_t S = pr.letters.size();

    // lambda -> 0+ limit: all rows on the zero-rate column.
    FixedLambda low;
    {
        std::size_t k0 = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
            double s = 0.0;
            for (std::size_t idx = 0; idx < S; ++idx) s += pr.t[idx] * pr.rho[idx * K + k];
            if (s < best) {
                best = s;
                k0 = k;
            }
        }
        low.q.assign(K, 0.0);
        low.q[k0] = 1.0;
        low.cond.assign(S * K, 0.0);
        for (std::size_t idx = 0; idx < S; ++idx) low.cond[idx * K + k0] = 1.0;
        low.distortion = best;
        low.converged = true;
    }

    const double lambda_cap =
        std::min(std::log(static_cast<double>(J)), std::log(static_cast<double>(K))) / d;
    std::vector<double> uniform(K, 1.0 / static_cast<double>(K));
    FixedLambda high = solve_fixed_lambda(pr, lambda_cap, uniform, options);
    long long inner_total = high.iterations;
    bool capped = !high.converged;

    auto warm_start = [&](const std::vector<double>& q) {
        constexpr double kMix = 1e-8;
        std::vector<double> out(K);
        for (std::size_t k = 0; k < K; ++k) out[k] = (1.0 - kMix) * q[k] + kMix / static_cast<double>(K);
        return out;
    };

    int outer = 0;
    std::vector<double> last_q = high.q;
    if (high.distortion > d) {
        // Numerically at the cap already; no bracket to refine.
        low = high;
    } else {
        while (outer < options.max_outer) {
            const double lo = low.lambda;
            const double hi = high.lambda;
            if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            ++outer;
            FixedLambda cur = solve_fixed_lambda(pr, mid, warm_start(last_q), options);
            inner_total += cur.iterations;
            capped = capped || !cur.converged;
            last_q = cur.q;
            if (cur.distortion == d) {
                low = cur;
                high = std::move(cur);
                break;
            }
            if (cur.distortion > d) {
                low = std::move(cur);
            } else {
                high = std::move(cur);
            }
        }
    }

    // Mix the bracket ends so the constraint is met with equality.
    double theta = 0.0;  // weight on the low-multiplier (higher distortion) end
    if (low.distortion > high.distortion) {
        theta = std::clamp((d - high.distortion) / (low.distortion - high.distortion), 0.0, 1.0);
    }
    std::vector<double> cond(S * K);
    for (std::size_t i = 0; i < cond.size(); ++i) {
        cond[i] = theta * low.cond[i] + (1.0 - theta) * high.cond[i];
    }

    sol.q_cond = expand_rows(pr, J, cond);
    sol.q_out.assign(K, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t k = 0; k < K; ++k) sol.q_out[k] += p[j] * sol.q_cond[j * K + k];
    }
    sol.achieved_distortion = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t k = 0; k < K; ++k) {
            sol.achieved_distortion += p[j] * sol.q_cond[j * K + k] * rho(j, k);
        }
    }
    sol.rate = mutual_information(p, sol.q_cond, K);
    sol.lambda_star = high.lambda;
    sol.lambda_lower = low.lambda;
    sol.outer_iterations = outer;
    sol.inner_iterations = inner_total;
    sol.residuals = certificate_residuals(pr, sol, d);
    sol.kkt_residual = sol.residuals.max();

    if (sol.kkt_residual > options.tol) {
        const std::string why = capped ? "iteration cap reached" : "residual above tolerance";
        throw ConvergenceError("solve_rd: " + why + " (kkt residual " +
                                   std::to_string(sol.kkt_residual) + ")",
                               std::move(sol));
    }
    return sol;
}

// ---------------------------------------------------------------------------

std::shared_ptr<const RDSolution> RdCache::find_or_solve(const NType& t, double d,
                                                         const DistortionMeasure& rho,
                                                         const SolverOptions& options) {
    Key key{std::vector<int>(t.counts().begin(), t.counts().end()),
            std::bit_cast<std::uint64_t>(d), rho.digest()};
    {
        std::lock_guard lock(mutex_);
        if (auto it = table_.find(key); it != table_.end()) return it->second;
    }
    auto sol = std::make_shared<const RDSolution>(solve_rd(t.as_distribution(), d, rho, options));
    std::lock_guard lock(mutex_);
    auto [it, inserted] = table_.emplace(std::move(key), sol);
    return it->second;
}

std::size_t RdCache::size() const {
    std::lock_guard lock(mutex_);
    return table_.size();
}

void RdCache::clear() {
    std::lock_guard lock(mutex_);
    table_.clear();
}

RdCache& default_rd_cache() {
    static RdCache cache;
    return cache;
}

std::shared_ptr<const RDSolution> rd_of_type(const NType& t, double d,
                                             const DistortionMeasure& rho, RdCache& cache,
                                             const SolverOptions& options) {
    if (t.alphabet_size() != rho.J()) {
        throw InvalidInput("rd_of_type: type alphabet does not match J");
    }
    return cache.find_or_solve(t, d, rho, options);
}

} // namespace nmlrd

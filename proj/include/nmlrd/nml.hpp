#pragma once

#include "nmlrd/core_model.hpp"
#include "nmlrd/rng.hpp"
#include "nmlrd/type_engine.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace nmlrd {

/// Normalized maximum-likelihood distribution over B^n for the i.i.d. class,
/// stored through its reconstruction types.
struct NmlModel {
    int n = 0;
    std::size_t K = 0;
    double log_shtarkov = 0.0;         ///< ln S_n
    TypeTable types;
    std::vector<double> type_weights;  ///< ln|T(s)| + sum_k n s(k) ln s(k)
    std::vector<double> type_cdf;      ///< cumulative NML mass of each type class
};

NmlModel build_nml(int n, std::size_t K, std::size_t type_limit = kDefaultTypeLimit);

/// ln S_n by type decomposition.
double shtarkov_sum(int n, std::size_t K, std::size_t type_limit = kDefaultTypeLimit);

/// (K-1)/2 ln n + ln(Gamma(1/2)^K / ((2 pi)^{(K-1)/2} Gamma(K/2))).
double shtarkov_asymptote(int n, std::size_t K);

/// sum_k n_k ln(n_k / n), the log maximum likelihood of a sequence with
/// these counts.
double log_max_likelihood(std::span<const int> counts);

double nml_log_prob(std::span<const Symbol> y, const NmlModel& model);

/// Index into model.types of a type class drawn with its total NML mass.
std::size_t sample_nml_type(const NmlModel& model, CounterStream& stream);

/// Exact NML draw: type class by its total mass, then a uniform member.
Sequence sample_nml(const NmlModel& model, CounterStream& stream);

/// Raw draw Z_i (i >= 1) of the common-randomness stream for a seed. Stream
/// (seed, i) holds the acceptance uniform U_i in word 0 and Z_i after it, so a
/// decoder can regenerate any Z_i from (seed, i) alone.
Sequence raw_draw(const NmlModel& model, std::uint64_t seed, std::uint64_t index);

struct StreamDraw {
    std::uint64_t index = 0;  ///< 1-based raw index
    bool accepted = false;
    Sequence sequence;        ///< Z_i; left empty for rejected draws
};

/// Acceptance-rejection filter turning i.i.d. NML draws into i.i.d. target^n
/// draws. Draw Z_i is accepted when ln U_i < ln target^n(Z_i) - ln ML(Z_i),
/// which happens with probability 1/S_n whatever the target. The ratio
/// depends on Z_i only through its type, so rejected draws are never
/// materialized.
class AcceptRejectStream {
public:
    AcceptRejectStream(const NmlModel& model, Distribution target, std::uint64_t seed);

    StreamDraw next();

    /// Advances to the next accepted draw whose per-position costs sum to at
    /// most `limit`, building each accepted candidate position by position and
    /// abandoning it once the running cost exceeds the limit. Gives up with
    /// nullopt once `cap` raw draws have been used.
    std::optional<StreamDraw> next_within(std::span<const Symbol> x,
                                          const DistortionMeasure& rho, double limit,
                                          std::uint64_t cap,
                                          std::uint64_t* accepted_count = nullptr);
    [[nodiscard]] std::uint64_t position() const noexcept { return index_; }

private:
    const NmlModel& model_;
    Distribution target_;
    std::vector<double> log_ratio_;  ///< per reconstruction type
    std::uint64_t seed_;
    std::uint64_t index_ = 0;
};

} // namespace nmlrd

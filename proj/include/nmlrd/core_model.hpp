#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nmlrd {

/// Symbol index, 0-based on both the source and reconstruction side.
using Symbol = std::int32_t;
using Sequence = std::vector<Symbol>;

/// Probability vector over a finite alphabet. Validated and renormalized once
/// at construction; immutable afterwards.
class Distribution {
public:
    static constexpr double kSumTolerance = 1e-12;

    explicit Distribution(std::vector<double> mass);

    static Distribution uniform(std::size_t size);
    static Distribution bernoulli(double p1);
    static Distribution point_mass(std::size_t size, std::size_t at);

    [[nodiscard]] std::size_t size() const noexcept { return mass_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return mass_[i]; }
    [[nodiscard]] std::span<const double> mass() const noexcept { return mass_; }

private:
    std::vector<double> mass_;
};

/// Optional exact representation of a distortion matrix: entry(j,k) equals
/// numerators[j*K+k] / denominator.
struct RationalGrid {
    static constexpr std::int64_t kMaxDenominator = 1'000'000;

    std::vector<std::int64_t> numerators;
    std::int64_t denominator = 1;
};

/// J x K single-letter distortion measure with entries in [0, rho_max] and a
/// zero in every row.
class DistortionMeasure {
public:
    DistortionMeasure(std::size_t J, std::size_t K, std::vector<double> entries,
                      double rho_max);

    /// Subtracts each row's minimum before validating.
    static DistortionMeasure normalized(std::size_t J, std::size_t K,
                                        std::vector<double> entries,
                                        double rho_max);
    static DistortionMeasure hamming(std::size_t size, double rho_max = 1.0);
    /// Builds the measure from integer numerators over a common denominator.
    static DistortionMeasure from_grid(std::size_t J, std::size_t K,
                                       std::vector<std::int64_t> numerators,
                                       std::int64_t denominator, double rho_max);

    /// Attaches a grid with the given denominator; throws if some entry is not
    /// a multiple of 1/denominator (to 1e-12).
    [[nodiscard]] DistortionMeasure with_grid(std::int64_t denominator) const;

    [[nodiscard]] std::size_t J() const noexcept { return J_; }
    [[nodiscard]] std::size_t K() const noexcept { return K_; }
    [[nodiscard]] double rho_max() const noexcept { return rho_max_; }
    /// Smallest strictly positive entry; 0 if the matrix is identically zero.
    [[nodiscard]] double rho_min() const noexcept { return rho_min_; }
    [[nodiscard]] double operator()(std::size_t j, std::size_t k) const {
        return entries_[j * K_ + k];
    }
    [[nodiscard]] std::span<const double> entries() const noexcept { return entries_; }
    [[nodiscard]] const std::optional<RationalGrid>& grid() const noexcept { return grid_; }

    /// Smallest k with rho(j,k) == 0.
    [[nodiscard]] std::size_t zero_column(std::size_t j) const;

    /// 64-bit FNV-1a digest over (J, K, rho_max, entries) bit patterns.
    [[nodiscard]] std::uint64_t digest() const;

private:
    DistortionMeasure() = default;
    void validate() const;

    std::size_t J_ = 0;
    std::size_t K_ = 0;
    double rho_max_ = 0.0;
    double rho_min_ = 0.0;
    std::vector<double> entries_;
    std::optional<RationalGrid> grid_;
};

/// n-type of a source sequence: symbol counts summing to n.
class NType {
public:
    explicit NType(std::vector<int> counts);

    [[nodiscard]] int n() const noexcept { return n_; }
    [[nodiscard]] std::size_t alphabet_size() const noexcept { return counts_.size(); }
    [[nodiscard]] std::span<const int> counts() const noexcept { return counts_; }
    [[nodiscard]] int operator[](std::size_t j) const { return counts_[j]; }
    [[nodiscard]] Distribution as_distribution() const;

    friend bool operator==(const NType&, const NType&) = default;

private:
    std::vector<int> counts_;
    int n_ = 0;
};

/// Throws InvalidInput unless every symbol lies in [0, alphabet) and the
/// sequence is non-empty.
void validate_sequence(std::span<const Symbol> seq, std::size_t alphabet,
                       const char* what = "sequence");

/// (1/n) * sum_i rho(x_i, y_i).
double n_fold_distortion(std::span<const Symbol> x, std::span<const Symbol> y,
                         const DistortionMeasure& rho);

NType type_of(std::span<const Symbol> x, std::size_t J);

/// Parses the distortion-measure text format:
///
///     # comment
///     J 2
///     K 2
///     rho_max 1
///     entries 0 1
///             1 0
///     grid_denominator 1      (optional)
///
/// Entries are row-major. Without `normalize` a matrix violating the
/// zero-per-row condition is rejected.
DistortionMeasure parse_distortion(const std::string& text, bool normalize = false);
DistortionMeasure load_distortion(const std::string& path, bool normalize = false);
std::string format_distortion(const DistortionMeasure& rho);

} // namespace nmlrd

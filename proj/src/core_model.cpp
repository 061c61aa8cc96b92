#include "nmlrd/core_model.hpp"

#include "nmlrd/errors.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace nmlrd {

// ---------------------------------------------------------------------------
// Distribution

Distribution::Distribution(std::vector<double> mass) : mass_(std::move(mass)) {
    if (mass_.empty()) {
        throw InvalidInput("distribution: alphabet size must be at least 1");
    }
    double sum = 0.0;
    for (double m : mass_) {
        if (!std::isfinite(m) || m < 0.0) {
            throw InvalidInput("distribution: entries must be finite and nonnegative");
        }
        sum += m;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        throw InvalidInput("distribution: entries sum to " + std::to_string(sum) +
                           ", expected 1");
    }
    for (double& m : mass_) m /= sum;
}

Distribution Distribution::uniform(std::size_t size) {
    if (size == 0) throw InvalidInput("distribution: alphabet size must be at least 1");
    return Distribution(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

Distribution Distribution::bernoulli(double p1) {
    if (!(p1 >= 0.0 && p1 <= 1.0)) throw InvalidInput("bernoulli: parameter outside [0,1]");
    return Distribution({1.0 - p1, p1});
}

Distribution Distribution::point_mass(std::size_t size, std::size_t at) {
    if (at >= size) throw InvalidInput("point_mass: index out of range");
    std::vector<double> m(size, 0.0);
    m[at] = 1.0;
    return Distribution(std::move(m));
}

// ---------------------------------------------------------------------------
// DistortionMeasure

DistortionMeasure::DistortionMeasure(std::size_t J, std::size_t K,
                                     std::vector<double> entries, double rho_max)
    : J_(J), K_(K), rho_max_(rho_max), entries_(std::move(entries)) {
    validate();
    for (double v : entries_) {
        if (v > 0.0 && (rho_min_ == 0.0 || v < rho_min_)) rho_min_ = v;
    }
}

void DistortionMeasure::validate() const {
    if (J_ == 0 || K_ == 0) throw InvalidInput("distortion: alphabets must be non-empty");
    if (entries_.size() != J_ * K_) {
        throw InvalidInput("distortion: expected " + std::to_string(J_ * K_) +
                           " entries, got " + std::to_string(entries_.size()));
    }
    if (!std::isfinite(rho_max_) || rho_max_ <= 0.0) {
        throw InvalidInput("distortion: rho_max must be positive");
    }
    for (std::size_t j = 0; j < J_; ++j) {
        double row_min = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K_; ++k) {
            const double v = entries_[j * K_ + k];
            if (!std::isfinite(v) || v < 0.0 || v > rho_max_) {
                throw InvalidInput("distortion: entry (" + std::to_string(j) + "," +
                                   std::to_string(k) + ") outside [0, rho_max]");
            }
            row_min = std::min(row_min, v);
        }
        if (row_min != 0.0) {
            throw InvalidInput("distortion: row " + std::to_string(j) +
                               " has no zero entry (max_j min_k rho(j,k) = 0 violated)");
        }
    }
}

DistortionMeasure DistortionMeasure::normalized(std::size_t J, std::size_t K,
                                                std::vector<double> entries,
                                                double rho_max) {
    if (entries.size() != J * K) {
        throw InvalidInput("distortion: entry count does not match J*K");
    }
    for (std::size_t j = 0; j < J; ++j) {
        const auto row = entries.begin() + static_cast<std::ptrdiff_t>(j * K);
        const double m = *std::min_element(row, row + static_cast<std::ptrdiff_t>(K));
        for (std::size_t k = 0; k < K; ++k) row[static_cast<std::ptrdiff_t>(k)] -= m;
    }
    DistortionMeasure out(J, K, std::move(entries), rho_max);
    return out;
}

DistortionMeasure DistortionMeasure::hamming(std::size_t size, double rho_max) {
    std::vector<double> e(size * size, rho_max);
    for (std::size_t j = 0; j < size; ++j) e[j * size + j] = 0.0;
    std::vector<std::int64_t> num(size * size, 1);
    for (std::size_t j = 0; j < size; ++j) num[j * size + j] = 0;
    DistortionMeasure out(size, size, std::move(e), rho_max);
    // Hamming with integer-valued rho_max stays exactly representable.
    if (rho_max == std::floor(rho_max) && rho_max <= 1e6) {
        for (auto& v : num) v *= static_cast<std::int64_t>(rho_max);
        out.grid_ = RationalGrid{std::move(num), 1};
    }
    return out;
}

DistortionMeasure DistortionMeasure::from_grid(std::size_t J, std::size_t K,
                                               std::vector<std::int64_t> numerators,
                                               std::int64_t denominator,
                                               double rho_max) {
    if (denominator < 1 || denominator > RationalGrid::kMaxDenominator) {
        throw InvalidInput("distortion: grid denominator must lie in [1, 1e6]");
    }
    if (numerators.size() != J * K) {
        throw InvalidInput("distortion: numerator count does not match J*K");
    }
    std::vector<double> e(numerators.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (numerators[i] < 0) throw InvalidInput("distortion: negative grid numerator");
        e[i] = static_cast<double>(numerators[i]) / static_cast<double>(denominator);
    }
    DistortionMeasure out(J, K, std::move(e), rho_max);
    out.grid_ = RationalGrid{std::move(numerators), denominator};
    return out;
}

DistortionMeasure DistortionMeasure::with_grid(std::int64_t denominator) const {
    if (denominator < 1 || denominator > RationalGrid::kMaxDenominator) {
        throw InvalidInput("distortion: grid denominator must lie in [1, 1e6]");
    }
    std::vector<std::int64_t> num(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const double scaled = entries_[i] * static_cast<double>(denominator);
        const double r = std::round(scaled);
        if (std::abs(r / static_cast<double>(denominator) - entries_[i]) > 1e-12) {
            throw InvalidInput("distortion: entry " + std::to_string(entries_[i]) +
                               " is not on the grid 1/" + std::to_string(denominator));
        }
        num[i] = static_cast<std::int64_t>(r);
    }
    DistortionMeasure out = *this;
    out.grid_ = RationalGrid{std::move(num), denominator};
    return out;
}

std::size_t DistortionMeasure::zero_column(std::size_t j) const {
    for (std::size_t k = 0; k < K_; ++k) {
        if (entries_[j * K_ + k] == 0.0) return k;
    }
    throw InvalidInput("distortion: row without zero entry");  // unreachable after validate
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
        h ^= (word >> (8 * b)) & 0xffU;
        h *= kFnvPrime;
    }
}

} // namespace

std::uint64_t DistortionMeasure::digest() const {
    std::uint64_t h = kFnvOffset;
    fnv_mix(h, J_);
    fnv_mix(h, K_);
    fnv_mix(h, std::bit_cast<std::uint64_t>(rho_max_));
    for (double v : entries_) fnv_mix(h, std::bit_cast<std::uint64_t>(v));
    return h;
}

// ---------------------------------------------------------------------------
// NType / sequences

NType::NType(std::vector<int> counts) : counts_(std::move(counts)) {
    if (counts_.empty()) throw InvalidInput("type: alphabet size must be at least 1");
    long long total = 0;
    for (int c : counts_) {
        if (c < 0) throw InvalidInput("type: negative count");
        total += c;
    }
    if (total < 1 || total > std::numeric_limits<int>::max()) {
        throw InvalidInput("type: blocklength must be positive");
    }
    n_ = static_cast<int>(total);
}

Distribution NType::as_distribution() const {
    std::vector<double> m(counts_.size());
    for (std::size_t j = 0; j < counts_.size(); ++j) {
        m[j] = static_cast<double>(counts_[j]) / static_cast<double>(n_);
    }
    return Distribution(std::move(m));
}

void validate_sequence(std::span<const Symbol> seq, std::size_t alphabet, const char* what) {
    if (seq.empty()) throw InvalidInput(std::string(what) + ": length must be at least 1");
    for (Symbol s : seq) {
        if (s < 0 || static_cast<std::size_t>(s) >= alphabet) {
            throw InvalidInput(std::string(what) + ": symbol " + std::to_string(s) +
                               " outside alphabet of size " + std::to_string(alphabet));
        }
    }
}

double n_fold_distortion(std::span<const Symbol> x, std::span<const Symbol> y,
                         const DistortionMeasure& rho) {
    if (x.size() != y.size()) {
        throw InvalidInput("n_fold_distortion: length mismatch (" + std::to_string(x.size()) +
                           " vs " + std::to_string(y.size()) + ")");
    }
    validate_sequence(x, rho.J(), "source sequence");
    validate_sequence(y, rho.K(), "reconstruction sequence");
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum += rho(static_cast<std::size_t>(x[i]), static_cast<std::size_t>(y[i]));
    }
    return sum / static_cast<double>(x.size());
}

NType type_of(std::span<const Symbol> x, std::size_t J) {
    validate_sequence(x, J, "source sequence");
    std::vector<int> counts(J, 0);
    for (Symbol s : x) ++counts[static_cast<std::size_t>(s)];
    return NType(std::move(counts));
}

// ---------------------------------------------------------------------------
// Text format

namespace {

double parse_real(const std::string& tok, const std::string& field, int line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != tok.size()) {
        throw InvalidInput("distortion file line " + std::to_string(line) + ": field '" +
                           field + "' expects a number, got '" + tok + "'");
    }
    return v;
}

std::size_t parse_count(const std::string& tok, const std::string& field, int line) {
    const double v = parse_real(tok, field, line);
    if (v < 1 || v != std::floor(v) || v > 1e6) {
        throw InvalidInput("distortion file line " + std::to_string(line) + ": field '" +
                           field + "' expects a positive integer");
    }
    return static_cast<std::size_t>(v);
}

} // namespace

DistortionMeasure parse_distortion(const std::string& text, bool normalize) {
    std::istringstream in(text);
    std::string raw;
    std::optional<std::size_t> J, K;
    std::optional<double> rho_max;
    std::optional<std::int64_t> grid_den;
    std::vector<double> entries;
    std::string current;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        std::string tok;
        bool first = true;
        while (ls >> tok) {
            if (first && !tok.empty() && (std::isalpha(static_cast<unsigned char>(tok[0])) != 0)) {
                if (tok.back() == ':' || tok.back() == '=') tok.pop_back();
                current = tok;
                first = false;
                continue;
            }
            first = false;
            if (tok == "=" || tok == ":") continue;
            if (current == "J") {
                J = parse_count(tok, current, line_no);
            } else if (current == "K") {
                K = parse_count(tok, current, line_no);
            } else if (current == "rho_max") {
                rho_max = parse_real(tok, current, line_no);
            } else if (current == "entries") {
                entries.push_back(parse_real(tok, current, line_no));
            } else if (current == "grid_denominator") {
                grid_den = static_cast<std::int64_t>(parse_count(tok, current, line_no));
            } else if (current.empty()) {
                throw InvalidInput("distortion file line " + std::to_string(line_no) +
                                   ": value without a field name");
            } else {
                throw InvalidInput("distortion file line " + std::to_string(line_no) +
                                   ": unknown field '" + current + "'");
            }
        }
    }
    if (!J || !K || !rho_max) {
        throw InvalidInput("distortion file: fields J, K, rho_max and entries are required");
    }
    DistortionMeasure rho = normalize
        ? DistortionMeasure::normalized(*J, *K, std::move(entries), *rho_max)
        : DistortionMeasure(*J, *K, std::move(entries), *rho_max);
    if (grid_den) rho = rho.with_grid(*grid_den);
    return rho;
}

DistortionMeasure load_distortion(const std::string& path, bool normalize) {
    std::ifstream f(path);
    if (!f) throw InvalidInput("cannot open distortion file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_distortion(ss.str(), normalize);
}

std::string format_distortion(const DistortionMeasure& rho) {
    std::ostringstream out;
    char buf[64];
    out << "J " << rho.J() << "\nK " << rho.K() << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", rho.rho_max());
    out << "rho_max " << buf << "\nentries";
    for (std::size_t j = 0; j < rho.J(); ++j) {
        out << (j == 0 ? " " : "\n       ");
        for (std::size_t k = 0; k < rho.K(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", rho(j, k));
            out << (k == 0 ? "" : " ") << buf;
        }
    }
    out << "\n";
    if (rho.grid()) out << "grid_denominator " << rho.grid()->denominator << "\n";
    return out.str();
}

} // namespace nmlrd

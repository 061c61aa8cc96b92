#pragma once

#include "nmlrd/core_model.hpp"
#include "nmlrd/intcode.hpp"
#include "nmlrd/nml.hpp"
#include "nmlrd/rd_solver.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace nmlrd {

struct CodecConfig {
    int n = 0;
    std::size_t J = 0;
    std::size_t K = 0;
    double d = 0.0;
    double slack_exponent = 0.625;
    CoderKind coder = CoderKind::prefix;
    std::uint64_t seed = 0;
    std::uint64_t index_cap = 1'000'000'000;

    /// Throws InvalidInput unless n >= 2, d > 0 and the exponent is in (1/2, 1).
    void validate() const;
};

/// d + 2 rho_max / n^{slack_exponent}: the distortion the search accepts.
double slack_distortion(const CodecConfig& cfg, double rho_max);

/// Number of post-correction records: ceil((2 rho_max/d) n^{1 - slack_exponent}),
/// capped at n since no position is corrected twice.
std::size_t correction_count(const CodecConfig& cfg, double rho_max);

struct MessageHeader {
    std::uint32_t n = 0;
    std::uint16_t J = 0;
    std::uint16_t K = 0;
    std::string d_text;
    std::string rho_max_text;
    std::string slack_exponent_text;
    std::uint64_t seed = 0;
    CoderKind coder = CoderKind::prefix;
    std::uint64_t rho_digest = 0;

    friend bool operator==(const MessageHeader&, const MessageHeader&) = default;
};

struct Correction {
    std::uint32_t position = 0;
    Symbol symbol = 0;

    friend bool operator==(const Correction&, const Correction&) = default;
};

struct CodedMessage {
    MessageHeader header;
    std::vector<Correction> corrections;  ///< sorted by position
    BitString index_code;

    /// Post-correction block followed by the index code.
    [[nodiscard]] BitString payload() const;
    [[nodiscard]] std::size_t total_bits() const;

    friend bool operator==(const CodedMessage&, const CodedMessage&) = default;
};

/// Encoder-side details that are not transmitted.
struct EncodeTrace {
    std::uint64_t raw_index = 0;       ///< i*, 1-based
    std::uint64_t accepted_draws = 0;  ///< accepted draws inspected, including the winner
    double rate = 0.0;                 ///< R(t, d, rho) of the source type
    double search_distortion = 0.0;    ///< rho_n(x, Z_{i*}) <= d'
    double final_distortion = 0.0;     ///< after post-correction, <= d
};

struct EncodeResult {
    CodedMessage message;
    EncodeTrace trace;
};

EncodeResult encode_traced(std::span<const Symbol> x, const DistortionMeasure& rho,
                           const CodecConfig& cfg, RdCache& cache = default_rd_cache());
CodedMessage encode(std::span<const Symbol> x, const DistortionMeasure& rho,
                    const CodecConfig& cfg);

/// Regenerates Z_{i*} from the seed and applies the corrections. The header
/// must agree with cfg; FramingError otherwise.
Sequence decode(const CodedMessage& msg, const CodecConfig& cfg);

/// Container bytes: magic "NMRD", version, header fields, padding count,
/// payload bytes.
std::vector<std::uint8_t> serialize(const CodedMessage& msg);
CodedMessage deserialize(const std::vector<std::uint8_t>& bytes);

/// Splits a concatenation of prefix-coder payloads into messages; the
/// correction block length is known from cfg and the index is self-delimiting.
std::vector<CodedMessage> split_prefix_stream(const BitString& stream, const CodecConfig& cfg,
                                              const MessageHeader& header);

/// Shared NML model cache keyed by (n, K).
std::shared_ptr<const NmlModel> shared_nml_model(int n, std::size_t K);

struct EmpiricalRate {
    double mean_nats = 0.0;  ///< per symbol
    double standard_error = 0.0;
    double mean_bits = 0.0;
    double mean_index = 0.0;
    long long trials = 0;
    double expected_rd = 0.0;
    double rd = 0.0;
    double envelope = 0.0;        ///< theorem 1 (non-prefix) or 2 (prefix) explicit terms
    bool envelope_complete = true;
    double converse_floor = 0.0;
    double max_distortion = 0.0;  ///< worst decoded distortion over the trials
};

/// Encodes `trials` i.i.d. p sources (sources and common randomness derived
/// from (seed, trial)), decoding each to confirm the distortion.
EmpiricalRate empirical_rate(const Distribution& p, const DistortionMeasure& rho,
                             const CodecConfig& cfg, long long trials, std::uint64_t seed);

} // namespace nmlrd

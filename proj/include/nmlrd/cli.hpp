#pragma once

#include "nmlrd/intcode.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace nmlrd::cli {

/// Exit codes of `run`.
enum ExitCode : int {
    kOk = 0,
    kBoundViolated = 1,
    kBadInput = 2,
    kRuntimeFailure = 3,
};

struct ExperimentConfig {
    std::string subcommand;
    std::vector<double> p;         ///< source law
    std::string dist_path;         ///< distortion file; Hamming when empty
    bool normalize = false;        ///< subtract row minima when loading
    std::size_t alphabet = 2;      ///< alphabet size when no file or law fixes it
    double d = 0.1;
    int n = 64;
    std::vector<int> schedule;     ///< blocklengths; overrides n when non-empty
    long long trials = 1000;
    std::uint64_t seed = 1;
    CoderKind coder = CoderKind::prefix;
    double slack_exponent = 0.625;
    std::string input;
    std::string output;
    std::string suite;
    std::vector<double> deltas;
    std::vector<int> x;            ///< explicit source sequence
    std::vector<double> q;         ///< explicit reconstruction law
    double threshold = -1.0;       ///< ball radius; negative selects d'
    std::string method = "auto";   ///< exact | mc | auto
    double a = 0.0;                ///< Taylor-bound radius; 0 selects sqrt(2J+2)

    /// Canonical `key = value` rendering; fixed key order.
    [[nodiscard]] std::string canonical() const;
    /// 16 hex digits of the FNV-1a hash of canonical().
    [[nodiscard]] std::string digest() const;
};

/// Keys accepted by apply_setting, in canonical order.
const std::vector<std::string>& setting_keys();

/// Sets one field from its textual value. `where` prefixes diagnostics.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                   const std::string& where);

/// Reads `key = value` lines (`#` starts a comment) into cfg.
void load_config(const std::string& path, ExperimentConfig& cfg);

/// Runs one subcommand. CSV goes to cfg.output (stdout when empty) except for
/// encode/decode, whose output path names the container or reconstruction
/// file. Diagnostics go to `err`.
int run(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

/// RFC 4180 field quoting.
std::string csv_field(const std::string& text);
/// Decimal with 12 significant digits.
std::string csv_number(double v);

} // namespace nmlrd::cli

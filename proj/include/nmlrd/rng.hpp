#pragma once

#include <cstdint>

namespace nmlrd {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent 64-bit key from a parent key and an index.
constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t index) noexcept {
    return mix64(mix64(key) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Counter-based generator: word c of stream (seed, index) is a pure
/// function of the triple, so any stream position can be regenerated without
/// replaying earlier ones.
class CounterStream {
public:
    CounterStream(std::uint64_t seed, std::uint64_t index) noexcept
        : key_(derive_key(seed, index)) {}

    std::uint64_t next() noexcept { return mix64(key_ ^ mix64(counter_++)); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform on {0, ..., bound-1}; bound > 0. Lemire's multiply-and-reject.
    std::uint64_t below(std::uint64_t bound) noexcept {
        auto m = static_cast<unsigned __int128>(next()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    [[nodiscard]] std::uint64_t words_used() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace nmlrd

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nmlrd {

/// Index coder family: Elias (prefix-free) or fixed-to-variable (needs
/// external delimiting).
enum class CoderKind : std::uint8_t { prefix = 0, non_prefix = 1 };

std::string_view to_string(CoderKind kind);
/// Accepts prefix|elias and non_prefix|non-prefix|ftv.
CoderKind parse_coder_kind(std::string_view text);

/// Finite bit sequence, most significant bit of each field first.
class BitString {
public:
    BitString() = default;
    static BitString from_string(std::string_view text);  ///< "0101"

    void push_back(bool bit) { bits_.push_back(bit ? 1 : 0); }
    /// Appends the low `width` bits of value, most significant first.
    void append_uint(std::uint64_t value, unsigned width);
    void append(const BitString& other);

    [[nodiscard]] std::size_t size() const noexcept { return bits_.size(); }
    [[nodiscard]] bool empty() const noexcept { return bits_.empty(); }
    [[nodiscard]] bool operator[](std::size_t i) const { return bits_[i] != 0; }
    [[nodiscard]] std::string to_string() const;

    /// Big-endian packing into bytes; the last byte is zero-padded.
    [[nodiscard]] std::vector<std::uint8_t> pack() const;
    [[nodiscard]] unsigned padding() const noexcept {
        return static_cast<unsigned>((8 - bits_.size() % 8) % 8);
    }
    /// Inverse of pack(); throws FramingError if the padding is inconsistent.
    static BitString unpack(const std::vector<std::uint8_t>& bytes, unsigned padding);

    friend bool operator==(const BitString&, const BitString&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

/// Sequential reader over a BitString; throws FramingError past the end.
class BitReader {
public:
    explicit BitReader(const BitString& bits, std::size_t offset = 0)
        : bits_(bits), pos_(offset) {}

    bool read();
    std::uint64_t read_uint(unsigned width);
    [[nodiscard]] std::size_t position() const noexcept { return pos_; }
    [[nodiscard]] std::size_t remaining() const noexcept { return bits_.size() - pos_; }

private:
    const BitString& bits_;
    std::size_t pos_;
};

/// floor(log2 i) for i >= 1.
unsigned floor_log2(std::uint64_t i);
/// ceil(log2 n) for n >= 1 (0 for n = 1).
unsigned ceil_log2(std::uint64_t n);

/// Bijection from the positive integers onto all binary strings in
/// length-then-lexicographic order: 1 -> "0", 2 -> "1", 3 -> "00", ...
BitString ftv_encode(std::uint64_t i);
std::uint64_t ftv_decode(const BitString& b);
std::size_t ftv_length(std::uint64_t i);

/// Elias delta code; floor(log2 i) + 2 floor(log2(floor(log2 i) + 1)) + 1 bits.
BitString elias_encode(std::uint64_t i);
void elias_encode_into(std::uint64_t i, BitString& out);
std::size_t elias_length(std::uint64_t i);

struct EliasDecoded {
    std::uint64_t value = 0;
    std::size_t consumed = 0;
};
EliasDecoded elias_decode(const BitString& b, std::size_t offset = 0);
std::uint64_t elias_decode(BitReader& reader);

} // namespace nmlrd

#include "nmlrd/intcode.hpp"

#include "nmlrd/errors.hpp"

#include <bit>

namespace nmlrd {

std::string_view to_string(CoderKind kind) {
    return kind == CoderKind::prefix ? "prefix" : "non_prefix";
}

CoderKind parse_coder_kind(std::string_view text) {
    if (text == "prefix" || text == "elias") return CoderKind::prefix;
    if (text == "non_prefix" || text == "non-prefix" || text == "ftv") return CoderKind::non_prefix;
    throw InvalidInput("unknown coder kind '" + std::string(text) + "' (expected prefix or ftv)");
}

BitString BitString::from_string(std::string_view text) {
    BitString b;
    for (char c : text) {
        if (c != '0' && c != '1') throw InvalidInput("bit string: unexpected character");
        b.push_back(c == '1');
    }
    return b;
}

void BitString::append_uint(std::uint64_t value, unsigned width) {
    for (unsigned i = width; i-- > 0;) push_back((value >> i) & 1U);
}

void BitString::append(const BitString& other) {
    bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end());
}

std::string BitString::to_string() const {
    std::string s;
    s.reserve(bits_.size());
    for (auto b : bits_) s.push_back(b ? '1' : '0');
    return s;
}

std::vector<std::uint8_t> BitString::pack() const {
    std::vector<std::uint8_t> bytes((bits_.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i]) bytes[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
    }
    return bytes;
}

BitString BitString::unpack(const std::vector<std::uint8_t>& bytes, unsigned padding) {
    if (padding > 7 || (bytes.empty() && padding != 0)) {
        throw FramingError("bit payload: invalid padding count " + std::to_string(padding));
    }
    BitString b;
    const std::size_t total = bytes.size() * 8 - padding;
    b.bits_.reserve(total);
    for (std::size_t i = 0; i < bytes.size() * 8; ++i) {
        const bool bit = (bytes[i / 8] >> (7 - i % 8)) & 1U;
        if (i < total) {
            b.push_back(bit);
        } else if (bit) {
            throw FramingError("bit payload: nonzero padding bits");
        }
    }
    return b;
}

bool BitReader::read() {
    if (pos_ >= bits_.size()) throw FramingError("bit stream truncated");
    return bits_[pos_++];
}

std::uint64_t BitReader::read_uint(unsigned width) {
    if (remaining() < width) throw FramingError("bit stream truncated");
    std::uint64_t v = 0;
    for (unsigned i = 0; i < width; ++i) v = (v << 1) | (bits_[pos_++] ? 1U : 0U);
    return v;
}

unsigned floor_log2(std::uint64_t i) {
    return static_cast<unsigned>(std::bit_width(i)) - 1U;
}

unsigned ceil_log2(std::uint64_t n) {
    return n <= 1 ? 0U : static_cast<unsigned>(std::bit_width(n - 1));
}

BitString ftv_encode(std::uint64_t i) {
    if (i == 0) throw InvalidInput("ftv_encode: index must be positive");
    if (i == UINT64_MAX) throw InvalidInput("ftv_encode: index too large");
    const unsigned len = floor_log2(i + 1);
    BitString b;
    b.append_uint(i + 1 - (std::uint64_t{1} << len), len);
    return b;
}

std::uint64_t ftv_decode(const BitString& b) {
    if (b.empty()) throw FramingError("ftv_decode: empty codeword");
    if (b.size() > 63) throw FramingError("ftv_decode: codeword longer than 63 bits");
    BitReader r(b);
    const std::uint64_t v = r.read_uint(static_cast<unsigned>(b.size()));
    return (std::uint64_t{1} << b.size()) + v - 1;
}

std::size_t ftv_length(std::uint64_t i) {
    return floor_log2(i + 1);
}

void elias_encode_into(std::uint64_t i, BitString& out) {
    if (i == 0) throw InvalidInput("elias_encode: index must be positive");
    const unsigned len = floor_log2(i) + 1;
    const unsigned len_bits = floor_log2(len);
    out.append_uint(0, len_bits);
    out.append_uint(len, len_bits + 1);
    out.append_uint(i, len - 1);
}

BitString elias_encode(std::uint64_t i) {
    BitString b;
    elias_encode_into(i, b);
    return b;
}

std::size_t elias_length(std::uint64_t i) {
    const unsigned fl = floor_log2(i);
    return fl + 2 * floor_log2(fl + 1) + 1;
}

std::uint64_t elias_decode(BitReader& reader) {
    unsigned zeros = 0;
    while (!reader.read()) {
        if (++zeros > 6) throw FramingError("elias_decode: length prefix too long");
    }
    const std::uint64_t len = (std::uint64_t{1} << zeros) | reader.read_uint(zeros);
    if (len > 64) throw FramingError("elias_decode: value exceeds 64 bits");
    const auto rest = static_cast<unsigned>(len - 1);
    const std::uint64_t low = reader.read_uint(rest);
    return (std::uint64_t{1} << rest) | low;
}

EliasDecoded elias_decode(const BitString& b, std::size_t offset) {
    BitReader r(b, offset);
    EliasDecoded out;
    out.value = elias_decode(r);
    out.consumed = r.position() - offset;
    return out;
}

} // namespace nmlrd

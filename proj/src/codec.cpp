#include "nmlrd/codec.hpp"

#include "nmlrd/bounds.hpp"
#include "nmlrd/errors.hpp"
#include "nmlrd/parallel.hpp"
#include "nmlrd/rng.hpp"
#include "nmlrd/type_engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

namespace nmlrd {

namespace {

constexpr std::uint8_t kMagic[4] = {'N', 'M', 'R', 'D'};
constexpr std::uint8_t kVersion = 1;

std::string decimal(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_decimal(const std::string& text, const char* field) {
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw FramingError(std::string("container: malformed ") + field + " '" + text + "'");
    }
    return v;
}

unsigned position_bits(const CodecConfig& cfg) {
    return ceil_log2(static_cast<std::uint64_t>(cfg.n));
}

unsigned symbol_bits(const CodecConfig& cfg) {
    return ceil_log2(static_cast<std::uint64_t>(cfg.K));
}

MessageHeader make_header(const CodecConfig& cfg, const DistortionMeasure& rho) {
    MessageHeader h;
    h.n = static_cast<std::uint32_t>(cfg.n);
    h.J = static_cast<std::uint16_t>(cfg.J);
    h.K = static_cast<std::uint16_t>(cfg.K);
    h.d_text = decimal(cfg.d);
    h.rho_max_text = decimal(rho.rho_max());
    h.slack_exponent_text = decimal(cfg.slack_exponent);
    h.seed = cfg.seed;
    h.coder = cfg.coder;
    h.rho_digest = rho.digest();
    return h;
}

void check_header(const MessageHeader& h, const CodecConfig& cfg) {
    auto fail = [](const std::string& what) {
        throw FramingError("decode: header " + what + " does not match the configuration");
    };
    if (h.n != static_cast<std::uint32_t>(cfg.n)) fail("n");
    if (h.J != cfg.J || h.K != cfg.K) fail("alphabet sizes");
    if (parse_decimal(h.d_text, "d") != cfg.d) fail("d");
    if (parse_decimal(h.slack_exponent_text, "slack exponent") != cfg.slack_exponent) {
        fail("slack exponent");
    }
    if (h.seed != cfg.seed) fail("seed");
    if (h.coder != cfg.coder) fail("coder kind");
}

CodecConfig config_from_header(const MessageHeader& h) {
    CodecConfig cfg;
    cfg.n = static_cast<int>(h.n);
    cfg.J = h.J;
    cfg.K = h.K;
    cfg.d = parse_decimal(h.d_text, "d");
    cfg.slack_exponent = parse_decimal(h.slack_exponent_text, "slack exponent");
    cfg.seed = h.seed;
    cfg.coder = h.coder;
    return cfg;
}

std::vector<Correction> read_corrections(BitReader& r, const CodecConfig& cfg, std::size_t M) {
    std::vector<Correction> out(M);
    const unsigned pb = position_bits(cfg);
    const unsigned sb = symbol_bits(cfg);
    for (auto& c : out) {
        const std::uint64_t pos = r.read_uint(pb);
        const std::uint64_t sym = r.read_uint(sb);
        if (pos >= static_cast<std::uint64_t>(cfg.n)) throw FramingError("correction position out of range");
        if (sym >= cfg.K) throw FramingError("correction symbol out of range");
        c.position = static_cast<std::uint32_t>(pos);
        c.symbol = static_cast<Symbol>(sym);
    }
    return out;
}

std::uint64_t decode_index(const CodedMessage& msg) {
    if (msg.header.coder == CoderKind::prefix) {
        const EliasDecoded e = elias_decode(msg.index_code);
        if (e.consumed != msg.index_code.size()) throw FramingError("index code has trailing bits");
        return e.value;
    }
    return ftv_decode(msg.index_code);
}

void put_u(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
    for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_text(std::vector<std::uint8_t>& out, const std::string& s) {
    if (s.size() > 255) throw InvalidInput("container: header text field too long");
    out.push_back(static_cast<std::uint8_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& b) : b_(b) {}
    std::uint64_t u(int bytes) {
        need(static_cast<std::size_t>(bytes));
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v = (v << 8) | b_[pos_++];
        return v;
    }
    std::string text() {
        const auto len = static_cast<std::size_t>(u(1));
        need(len);
        std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_),
                      b_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
        pos_ += len;
        return s;
    }
    std::vector<std::uint8_t> rest() {
        std::vector<std::uint8_t> r(b_.begin() + static_cast<std::ptrdiff_t>(pos_), b_.end());
        pos_ = b_.size();
        return r;
    }

private:
    void need(std::size_t k) const {
        if (b_.size() - pos_ < k) throw FramingError("container truncated");
    }
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

} // namespace

void CodecConfig::validate() const {
    if (n < 2) throw InvalidInput("codec: n must be at least 2");
    if (J < 1 || K < 1 || J > 65535 || K > 65535) throw InvalidInput("codec: bad alphabet sizes");
    if (!(d > 0.0) || !std::isfinite(d)) throw InvalidInput("codec: d must be positive");
    if (!(slack_exponent > 0.5 && slack_exponent < 1.0)) {
        throw InvalidInput("codec: slack exponent must lie in (1/2, 1)");
    }
    if (index_cap < 1) throw InvalidInput("codec: index cap must be positive");
}

double slack_distortion(const CodecConfig& cfg, double rho_max) {
    return cfg.d + 2.0 * rho_max / std::pow(static_cast<double>(cfg.n), cfg.slack_exponent);
}

std::size_t correction_count(const CodecConfig& cfg, double rho_max) {
    const double v = 2.0 * rho_max / cfg.d * std::pow(static_cast<double>(cfg.n), 1.0 - cfg.slack_exponent);
    const double r = std::round(v);
    // Integer-valued products (e.g. 256^{3/8} = 8) must not round up.
    const double m = std::abs(v - r) <= 1e-9 * std::max(1.0, v) ? r : std::ceil(v);
    return std::min(static_cast<std::size_t>(m), static_cast<std::size_t>(cfg.n));
}

BitString CodedMessage::payload() const {
    const unsigned pb = ceil_log2(header.n);
    const unsigned sb = ceil_log2(header.K);
    BitString b;
    for (const auto& c : corrections) {
        b.append_uint(c.position, pb);
        b.append_uint(static_cast<std::uint64_t>(c.symbol), sb);
    }
    b.append(index_code);
    return b;
}

std::size_t CodedMessage::total_bits() const {
    return corrections.size() * (ceil_log2(header.n) + ceil_log2(header.K)) + index_code.size();
}

std::shared_ptr<const NmlModel> shared_nml_model(int n, std::size_t K) {
    static std::mutex mutex;
    static std::map<std::pair<int, std::size_t>, std::shared_ptr<const NmlModel>> table;
    {
        std::lock_guard lock(mutex);
        if (auto it = table.find({n, K}); it != table.end()) return it->second;
    }
    auto model = std::make_shared<const NmlModel>(build_nml(n, K));
    std::lock_guard lock(mutex);
    return table.emplace(std::pair{n, K}, model).first->second;
}

EncodeResult encode_traced(std::span<const Symbol> x, const DistortionMeasure& rho,
                           const CodecConfig& cfg, RdCache& cache) {
    cfg.validate();
    if (x.size() != static_cast<std::size_t>(cfg.n)) throw InvalidInput("encode: source length does not match n");
    if (rho.J() != cfg.J || rho.K() != cfg.K) throw InvalidInput("encode: distortion measure does not match J, K");
    validate_sequence(x, cfg.J, "source sequence");

    const NType t = type_of(x, cfg.J);
    const auto sol = rd_of_type(t, cfg.d, rho, cache);
    const auto model = shared_nml_model(cfg.n, cfg.K);
    const double n = static_cast<double>(cfg.n);
    const double search_limit = n * slack_distortion(cfg, rho.rho_max());

    EncodeResult res;
    res.trace.rate = sol->rate;
    AcceptRejectStream stream(*model, sol->output(), cfg.seed);
    auto found = stream.next_within(x, rho, search_limit, cfg.index_cap, &res.trace.accepted_draws);
    if (!found) {
        throw SearchOverflow("encode: no codeword within the index cap " + std::to_string(cfg.index_cap));
    }
    res.trace.raw_index = found->index;
    Sequence y = std::move(found->sequence);
    res.trace.search_distortion = n_fold_distortion(x, y, rho);

    const std::size_t M = correction_count(cfg, rho.rho_max());
    std::vector<std::uint32_t> order(x.size());
    std::iota(order.begin(), order.end(), 0U);
    auto contribution = [&](std::uint32_t i) {
        return rho(static_cast<std::size_t>(x[i]), static_cast<std::size_t>(y[i]));
    };
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return contribution(a) > contribution(b);
    });
    order.resize(M);
    std::sort(order.begin(), order.end());

    CodedMessage& msg = res.message;
    msg.header = make_header(cfg, rho);
    msg.corrections.reserve(M);
    for (std::uint32_t i : order) {
        const auto fix = static_cast<Symbol>(rho.zero_column(static_cast<std::size_t>(x[i])));
        msg.corrections.push_back({i, fix});
        y[i] = fix;
    }
    res.trace.final_distortion = n_fold_distortion(x, y, rho);
    if (!(res.trace.final_distortion <= cfg.d)) {
        throw Error("encode: corrected distortion " + decimal(res.trace.final_distortion) +
                    " exceeds d");
    }
    if (cfg.coder == CoderKind::prefix) {
        msg.index_code = elias_encode(res.trace.raw_index);
    } else {
        msg.index_code = ftv_encode(res.trace.raw_index);
    }
    return res;
}

CodedMessage encode(std::span<const Symbol> x, const DistortionMeasure& rho,
                    const CodecConfig& cfg) {
    return encode_traced(x, rho, cfg).message;
}

Sequence decode(const CodedMessage& msg, const CodecConfig& cfg) {
    cfg.validate();
    check_header(msg.header, cfg);
    const std::size_t M = correction_count(cfg, parse_decimal(msg.header.rho_max_text, "rho_max"));
    if (msg.corrections.size() != M) throw FramingError("decode: wrong number of correction records");
    const std::uint64_t index = decode_index(msg);
    if (index == 0) throw FramingError("decode: index must be positive");
    Sequence y = raw_draw(*shared_nml_model(cfg.n, cfg.K), cfg.seed, index);
    for (const auto& c : msg.corrections) {
        if (c.position >= y.size() || c.symbol < 0 || static_cast<std::size_t>(c.symbol) >= cfg.K) {
            throw FramingError("decode: correction record out of range");
        }
        y[c.position] = c.symbol;
    }
    return y;
}

std::vector<std::uint8_t> serialize(const CodedMessage& msg) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    out.push_back(kVersion);
    const MessageHeader& h = msg.header;
    put_u(out, h.n, 4);
    put_u(out, h.J, 2);
    put_u(out, h.K, 2);
    put_text(out, h.d_text);
    put_text(out, h.rho_max_text);
    put_text(out, h.slack_exponent_text);
    put_u(out, h.seed, 8);
    out.push_back(static_cast<std::uint8_t>(h.coder));
    put_u(out, h.rho_digest, 8);
    const BitString payload = msg.payload();
    out.push_back(static_cast<std::uint8_t>(payload.padding()));
    const auto bytes = payload.pack();
    out.insert(out.end(), bytes.begin(), bytes.end());
    return out;
}

CodedMessage deserialize(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    for (std::uint8_t m : kMagic) {
        if (r.u(1) != m) throw FramingError("container: bad magic bytes");
    }
    if (const auto v = r.u(1); v != kVersion) {
        throw FramingError("container: unsupported version " + std::to_string(v));
    }
    CodedMessage msg;
    MessageHeader& h = msg.header;
    h.n = static_cast<std::uint32_t>(r.u(4));
    h.J = static_cast<std::uint16_t>(r.u(2));
    h.K = static_cast<std::uint16_t>(r.u(2));
    h.d_text = r.text();
    h.rho_max_text = r.text();
    h.slack_exponent_text = r.text();
    h.seed = r.u(8);
    const auto coder = r.u(1);
    if (coder > 1) throw FramingError("container: unknown coder kind");
    h.coder = static_cast<CoderKind>(coder);
    h.rho_digest = r.u(8);
    const auto padding = static_cast<unsigned>(r.u(1));
    const BitString payload = BitString::unpack(r.rest(), padding);

    CodecConfig cfg = config_from_header(h);
    try {
        cfg.validate();
    } catch (const InvalidInput& e) {
        throw FramingError(std::string("container: invalid header: ") + e.what());
    }
    const std::size_t M = correction_count(cfg, parse_decimal(h.rho_max_text, "rho_max"));
    BitReader br(payload);
    msg.corrections = read_corrections(br, cfg, M);
    while (br.remaining() > 0) msg.index_code.push_back(br.read());
    if (msg.index_code.empty()) throw FramingError("container: missing index code");
    decode_index(msg);  // validates framing
    return msg;
}

std::vector<CodedMessage> split_prefix_stream(const BitString& stream, const CodecConfig& cfg,
                                              const MessageHeader& header) {
    if (cfg.coder != CoderKind::prefix) {
        throw InvalidInput("split_prefix_stream: only prefix-coded payloads are self-delimiting");
    }
    const std::size_t M = correction_count(cfg, parse_decimal(header.rho_max_text, "rho_max"));
    std::vector<CodedMessage> out;
    BitReader r(stream);
    while (r.remaining() > 0) {
        CodedMessage msg;
        msg.header = header;
        msg.corrections = read_corrections(r, cfg, M);
        msg.index_code = elias_encode(elias_decode(r));
        out.push_back(std::move(msg));
    }
    return out;
}

EmpiricalRate empirical_rate(const Distribution& p, const DistortionMeasure& rho,
                             const CodecConfig& cfg, long long trials, std::uint64_t seed) {
    cfg.validate();
    if (trials < 1) throw InvalidInput("empirical_rate: trials must be at least 1");
    if (p.size() != cfg.J) throw InvalidInput("empirical_rate: source size does not match J");
    std::vector<double> cdf(p.size());
    double total = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) cdf[j] = (total += p[j]);

    const auto count = static_cast<std::size_t>(trials);
    std::vector<double> bits(count), index(count), distortion(count);
    const std::uint64_t source_key = derive_key(seed, 0x736f75726365ULL);
    parallel_for(count, [&](std::size_t trial) {
        CounterStream stream(source_key, trial);
        Sequence x(static_cast<std::size_t>(cfg.n));
        for (auto& s : x) {
            auto j = static_cast<std::size_t>(
                std::upper_bound(cdf.begin(), cdf.end(), stream.uniform() * total) - cdf.begin());
            j = std::min(j, p.size() - 1);
            while (p[j] == 0.0 && j > 0) --j;
            s = static_cast<Symbol>(j);
        }
        CodecConfig local = cfg;
        local.seed = derive_key(seed, trial);
        const EncodeResult enc = encode_traced(x, rho, local);
        const Sequence y = decode(enc.message, local);
        bits[trial] = static_cast<double>(enc.message.total_bits());
        index[trial] = static_cast<double>(enc.trace.raw_index);
        distortion[trial] = n_fold_distortion(x, y, rho);
    });

    EmpiricalRate out;
    out.trials = trials;
    const double scale = std::numbers::ln2 / cfg.n;
    double sum = 0.0, sum_index = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        sum += bits[i];
        sum_index += index[i];
        out.max_distortion = std::max(out.max_distortion, distortion[i]);
    }
    const double mean_bits = sum / static_cast<double>(count);
    double var = 0.0;
    for (double b : bits) var += (b - mean_bits) * (b - mean_bits);
    var = count > 1 ? var / static_cast<double>(count - 1) : 0.0;
    out.mean_nats = mean_bits * scale;
    out.mean_bits = mean_bits / cfg.n;
    out.standard_error = std::sqrt(var / static_cast<double>(count)) * scale;
    out.mean_index = sum_index / static_cast<double>(count);
    out.expected_rd = expected_rd(p, cfg.d, rho, cfg.n).value;
    out.rd = solve_rd(p, cfg.d, rho).rate;
    const Envelope env = thm_envelope(Theorem::one, cfg.n, cfg.J, cfg.K, cfg.d, rho.rho_max());
    out.envelope = env.value;
    out.envelope_complete = env.complete;
    out.converse_floor = converse_floor(cfg.coder, cfg.n, cfg.J, cfg.K);
    return out;
}

} // namespace nmlrd

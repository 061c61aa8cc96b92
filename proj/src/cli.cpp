#include "nmlrd/cli.hpp"

#include "nmlrd/bounds.hpp"
#include "nmlrd/codec.hpp"
#include "nmlrd/core_model.hpp"
#include "nmlrd/dball.hpp"
#include "nmlrd/errors.hpp"
#include "nmlrd/nml.hpp"
#include "nmlrd/rd_solver.hpp"
#include "nmlrd/rng.hpp"
#include "nmlrd/type_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numbers>
#include <sstream>

namespace nmlrd::cli {

namespace {

using Row = std::vector<std::string>;

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
    std::string flat = text;
    std::replace(flat.begin(), flat.end(), ',', ' ');
    std::istringstream in(flat);
    return {std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()};
}

double to_double(const std::string& text, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw InvalidInput(where + ": '" + text + "' is not a finite number");
}

long long to_integer(const std::string& text, const std::string& where) {
    const double v = to_double(text, where);
    if (v != std::floor(v) || std::abs(v) > 9.0e15) {
        throw InvalidInput(where + ": '" + text + "' is not an integer");
    }
    return static_cast<long long>(v);
}

std::uint64_t to_seed(const std::string& text, const std::string& where) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(text, &used, 0);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw InvalidInput(where + ": '" + text + "' is not an unsigned 64-bit integer");
}

int to_blocklength(const std::string& text, const std::string& where) {
    const long long v = to_integer(text, where);
    if (v < 1 || v > 100'000'000) throw InvalidInput(where + ": blocklength must lie in [1, 1e8]");
    return static_cast<int>(v);
}

template <class T, class F>
std::vector<T> parse_list(const std::string& text, F&& convert) {
    std::vector<T> out;
    for (const auto& item : split_list(text)) out.push_back(convert(item));
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + csv_number(v[i]);
    return s;
}

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    return s;
}

std::string boolean(bool b) { return b ? "true" : "false"; }

struct Setting {
    std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<std::pair<std::string, Setting>>& settings() {
    using C = ExperimentConfig;
    using S = std::string;
    static const std::vector<std::pair<std::string, Setting>> table = {
        {"p", {[](C& c, const S& v, const S& w) { c.p = parse_list<double>(v, [&](const S& s) { return to_double(s, w); }); },
               [](const C& c) { return join(c.p); }}},
        {"dist", {[](C& c, const S& v, const S&) { c.dist_path = v; },
                  [](const C& c) { return c.dist_path; }}},
        {"normalize", {[](C& c, const S& v, const S& w) {
                           if (v != "true" && v != "false") throw InvalidInput(w + ": expected true or false");
                           c.normalize = v == "true";
                       },
                       [](const C& c) { return boolean(c.normalize); }}},
        {"alphabet", {[](C& c, const S& v, const S& w) {
                          const long long k = to_integer(v, w);
                          if (k < 1 || k > 65535) throw InvalidInput(w + ": alphabet must lie in [1, 65535]");
                          c.alphabet = static_cast<std::size_t>(k);
                      },
                      [](const C& c) { return std::to_string(c.alphabet); }}},
        {"d", {[](C& c, const S& v, const S& w) { c.d = to_double(v, w); },
               [](const C& c) { return csv_number(c.d); }}},
        {"n", {[](C& c, const S& v, const S& w) { c.n = to_blocklength(v, w); },
               [](const C& c) { return std::to_string(c.n); }}},
        {"schedule", {[](C& c, const S& v, const S& w) { c.schedule = parse_list<int>(v, [&](const S& s) { return to_blocklength(s, w); }); },
                      [](const C& c) { return join(c.schedule); }}},
        {"trials", {[](C& c, const S& v, const S& w) {
                        c.trials = to_integer(v, w);
                        if (c.trials < 1) throw InvalidInput(w + ": trials must be at least 1");
                    },
                    [](const C& c) { return std::to_string(c.trials); }}},
        {"seed", {[](C& c, const S& v, const S& w) { c.seed = to_seed(v, w); },
                  [](const C& c) { return std::to_string(c.seed); }}},
        {"coder", {[](C& c, const S& v, const S& w) {
                       try {
                           c.coder = parse_coder_kind(v);
                       } catch (const InvalidInput& e) {
                           throw InvalidInput(w + ": " + e.what());
                       }
                   },
                   [](const C& c) { return std::string(to_string(c.coder)); }}},
        {"slack_exponent", {[](C& c, const S& v, const S& w) { c.slack_exponent = to_double(v, w); },
                            [](const C& c) { return csv_number(c.slack_exponent); }}},
        {"input", {[](C& c, const S& v, const S&) { c.input = v; },
                   [](const C& c) { return c.input; }}},
        {"output", {[](C& c, const S& v, const S&) { c.output = v; },
                    [](const C& c) { return c.output; }}},
        {"suite", {[](C& c, const S& v, const S&) { c.suite = v; },
                   [](const C& c) { return c.suite; }}},
        {"deltas", {[](C& c, const S& v, const S& w) { c.deltas = parse_list<double>(v, [&](const S& s) { return to_double(s, w); }); },
                    [](const C& c) { return join(c.deltas); }}},
        {"x", {[](C& c, const S& v, const S& w) {
                   c.x = parse_list<int>(v, [&](const S& s) {
                       const long long k = to_integer(s, w);
                       if (k < 0 || k > 65535) throw InvalidInput(w + ": symbol out of range");
                       return static_cast<int>(k);
                   });
               },
               [](const C& c) { return join(c.x); }}},
        {"q", {[](C& c, const S& v, const S& w) { c.q = parse_list<double>(v, [&](const S& s) { return to_double(s, w); }); },
               [](const C& c) { return join(c.q); }}},
        {"threshold", {[](C& c, const S& v, const S& w) { c.threshold = to_double(v, w); },
                       [](const C& c) { return csv_number(c.threshold); }}},
        {"method", {[](C& c, const S& v, const S& w) {
                        if (v != "exact" && v != "mc" && v != "auto") {
                            throw InvalidInput(w + ": method must be exact, mc or auto");
                        }
                        c.method = v;
                    },
                    [](const C& c) { return c.method; }}},
        {"a", {[](C& c, const S& v, const S& w) { c.a = to_double(v, w); },
               [](const C& c) { return csv_number(c.a); }}},
    };
    return table;
}

class Csv {
public:
    explicit Csv(std::ostream& out) : out_(out) {}

    void row(const Row& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << csv_field(fields[i]);
        }
        out_ << '\n';
    }

private:
    std::ostream& out_;
};

std::string num(double v) { return csv_number(v); }
std::string num(long long v) { return std::to_string(v); }

// Shared context for one subcommand run.
struct Context {
    const ExperimentConfig& cfg;
    std::ostream& err;
    Csv csv;
    std::string tail_seed;
    std::string tail_digest;

    void header(Row names) {
        names.push_back("seed");
        names.push_back("config_digest");
        csv.row(names);
    }
    void row(Row fields) {
        fields.push_back(tail_seed);
        fields.push_back(tail_digest);
        csv.row(fields);
    }
};

DistortionMeasure load_measure(const ExperimentConfig& cfg, std::size_t size) {
    if (!cfg.dist_path.empty()) return load_distortion(cfg.dist_path, cfg.normalize);
    return DistortionMeasure::hamming(size);
}

std::size_t default_size(const ExperimentConfig& cfg) {
    return cfg.p.empty() ? cfg.alphabet : cfg.p.size();
}

Distribution source_law(const ExperimentConfig& cfg, const DistortionMeasure& rho) {
    if (cfg.p.empty()) throw InvalidInput("option p (source law) is required");
    Distribution p(cfg.p);
    if (p.size() != rho.J()) {
        throw InvalidInput("source law has " + std::to_string(p.size()) +
                           " entries but the distortion measure has J = " +
                           std::to_string(rho.J()));
    }
    return p;
}

std::vector<int> blocklengths(const ExperimentConfig& cfg) {
    return cfg.schedule.empty() ? std::vector<int>{cfg.n} : cfg.schedule;
}

Sequence draw_source(const Distribution& p, int n, std::uint64_t seed) {
    CounterStream stream(seed, 0);
    Sequence x(static_cast<std::size_t>(n));
    for (auto& s : x) {
        const double u = stream.uniform();
        double acc = 0.0;
        std::size_t j = 0;
        while (j + 1 < p.size() && (p[j] == 0.0 || u >= acc + p[j])) acc += p[j++];
        while (p[j] == 0.0) --j;
        s = static_cast<Symbol>(j);
    }
    return x;
}

Sequence read_symbols(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open input file '" + path + "'");
    Sequence x;
    std::string token;
    while (in >> token) {
        if (token[0] == '#') {
            std::getline(in, token);
            continue;
        }
        x.push_back(static_cast<Symbol>(to_integer(token, "input file '" + path + "'")));
    }
    return x;
}

Sequence source_sequence(const ExperimentConfig& cfg, const DistortionMeasure& rho) {
    Sequence x;
    if (!cfg.x.empty()) {
        x.assign(cfg.x.begin(), cfg.x.end());
    } else if (!cfg.input.empty()) {
        x = read_symbols(cfg.input);
    } else {
        x = draw_source(source_law(cfg, rho), cfg.n, cfg.seed);
    }
    validate_sequence(x, rho.J(), "source sequence");
    return x;
}

CodecConfig codec_config(const ExperimentConfig& cfg, const DistortionMeasure& rho, int n) {
    CodecConfig c;
    c.n = n;
    c.J = rho.J();
    c.K = rho.K();
    c.d = cfg.d;
    c.slack_exponent = cfg.slack_exponent;
    c.coder = cfg.coder;
    c.seed = cfg.seed;
    c.validate();
    return c;
}

int cmd_rd(Context& ctx) {
    const auto rho = load_measure(ctx.cfg, default_size(ctx.cfg));
    const auto p = source_law(ctx.cfg, rho);
    const RDSolution s = solve_rd(p, ctx.cfg.d, rho);
    ctx.header({"J", "K", "d", "rate_nats", "rate_bits", "lambda_star", "achieved_distortion",
                "kkt_residual", "zero_rate", "q_out"});
    ctx.row({num(static_cast<long long>(rho.J())), num(static_cast<long long>(rho.K())),
             num(ctx.cfg.d), num(s.rate), num(s.rate / std::numbers::ln2), num(s.lambda_star),
             num(s.achieved_distortion), num(s.kkt_residual), boolean(s.zero_rate),
             join(s.q_out)});
    return kOk;
}

int cmd_expected_rd(Context& ctx) {
    const auto rho = load_measure(ctx.cfg, default_size(ctx.cfg));
    const auto p = source_law(ctx.cfg, rho);
    const double rate = solve_rd(p, ctx.cfg.d, rho).rate;
    ctx.header({"n", "d", "expected_rd_nats", "expected_rd_bits", "rd_nats", "rd_bits",
                "gap_nats", "exact", "standard_error", "truncated_mass", "types_evaluated"});
    for (int n : blocklengths(ctx.cfg)) {
        ExpectedRdOptions opts;
        opts.seed = ctx.cfg.seed;
        const ExpectedRd e = expected_rd(p, ctx.cfg.d, rho, n, opts);
        ctx.row({num(static_cast<long long>(n)), num(ctx.cfg.d), num(e.value),
                 num(e.value / std::numbers::ln2), num(rate), num(rate / std::numbers::ln2),
                 num(e.value - rate), boolean(e.exact), num(e.standard_error),
                 num(e.truncated_mass), num(static_cast<long long>(e.types_evaluated))});
    }
    return kOk;
}

int cmd_shtarkov(Context& ctx) {
    const std::size_t K = ctx.cfg.alphabet;
    ctx.header({"n", "K", "log_shtarkov_nats", "log_shtarkov_bits", "asymptote_nats",
                "difference_nats"});
    for (int n : blocklengths(ctx.cfg)) {
        const double s = shtarkov_sum(n, K);
        const double a = shtarkov_asymptote(n, K);
        ctx.row({num(static_cast<long long>(n)), num(static_cast<long long>(K)), num(s),
                 num(s / std::numbers::ln2), num(a), num(s - a)});
    }
    return kOk;
}

int cmd_encode(Context& ctx) {
    if (ctx.cfg.output.empty()) throw InvalidInput("encode: option output (container path) is required");
    const auto rho = load_measure(ctx.cfg, default_size(ctx.cfg));
    const Sequence x = source_sequence(ctx.cfg, rho);
    const CodecConfig cc = codec_config(ctx.cfg, rho, static_cast<int>(x.size()));
    const EncodeResult r = encode_traced(x, rho, cc);
    const auto bytes = serialize(r.message);
    std::ofstream f(ctx.cfg.output, std::ios::binary);
    if (!f) throw InvalidInput("cannot open output file '" + ctx.cfg.output + "'");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("failed writing '" + ctx.cfg.output + "'");
    const double bits = static_cast<double>(r.message.total_bits());
    ctx.header({"n", "d", "coder", "corrections", "total_bits", "rate_nats", "rate_bits",
                "raw_index", "type_rate_nats", "search_distortion", "final_distortion",
                "container_bytes"});
    ctx.row({num(static_cast<long long>(cc.n)), num(cc.d), std::string(to_string(cc.coder)),
             num(static_cast<long long>(r.message.corrections.size())), num(bits),
             num(bits * std::numbers::ln2 / cc.n), num(bits / cc.n),
             num(static_cast<long long>(r.trace.raw_index)), num(r.trace.rate),
             num(r.trace.search_distortion), num(r.trace.final_distortion),
             num(static_cast<long long>(bytes.size()))});
    return kOk;
}

int cmd_decode(Context& ctx, std::ostream& out) {
    if (ctx.cfg.input.empty()) throw InvalidInput("decode: option input (container path) is required");
    std::ifstream f(ctx.cfg.input, std::ios::binary);
    if (!f) throw InvalidInput("cannot open input file '" + ctx.cfg.input + "'");
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                          std::istreambuf_iterator<char>());
    const CodedMessage msg = deserialize(bytes);
    const auto rho = load_measure(ctx.cfg, msg.header.J);
    if (rho.digest() != msg.header.rho_digest) {
        throw FramingError("decode: distortion measure digest does not match the container");
    }
    const CodecConfig cc = codec_config(ctx.cfg, rho, static_cast<int>(msg.header.n));
    const Sequence y = decode(msg, cc);
    std::ofstream file;
    std::ostream* dest = &out;
    if (!ctx.cfg.output.empty()) {
        file.open(ctx.cfg.output);
        if (!file) throw InvalidInput("cannot open output file '" + ctx.cfg.output + "'");
        dest = &file;
    }
    for (std::size_t i = 0; i < y.size(); ++i) *dest << (i ? " " : "") << y[i];
    *dest << '\n';
    return kOk;
}

int cmd_ball_prob(Context& ctx) {
    const auto rho = load_measure(ctx.cfg, default_size(ctx.cfg));
    const Sequence x = source_sequence(ctx.cfg, rho);
    const int n = static_cast<int>(x.size());
    Distribution q = ctx.cfg.q.empty()
                         ? rd_of_type(type_of(x, rho.J()), ctx.cfg.d, rho)->output()
                         : Distribution(ctx.cfg.q);
    if (q.size() != rho.K()) throw InvalidInput("reconstruction law size does not match K");
    double threshold = ctx.cfg.threshold;
    if (threshold < 0.0) threshold = slack_distortion(codec_config(ctx.cfg, rho, n), rho.rho_max());
    std::string method = ctx.cfg.method;
    if (method == "auto") method = rho.grid() ? "exact" : "mc";
    ctx.header({"n", "threshold", "method", "probability", "standard_error", "trials"});
    if (method == "exact") {
        const double prob = ball_prob_exact(x, rho, q, threshold);
        ctx.row({num(static_cast<long long>(n)), num(threshold), method, num(prob), num(0.0),
                 num(0LL)});
    } else {
        const McEstimate mc = ball_prob_mc(x, rho, q, threshold, ctx.cfg.trials, ctx.cfg.seed);
        ctx.row({num(static_cast<long long>(n)), num(threshold), method, num(mc.estimate),
                 num(mc.standard_error), num(mc.trials)});
    }
    return kOk;
}

int cmd_counterexample(Context& ctx) {
    const std::vector<double> deltas =
        ctx.cfg.deltas.empty() ? std::vector<double>{1e-3, 1e-6} : ctx.cfg.deltas;
    ctx.header({"n", "delta", "ratio", "probability", "rate_nats", "lambda_star", "exact",
                "standard_error"});
    for (int n : blocklengths(ctx.cfg)) {
        for (double delta : deltas) {
            const auto r = counterexample_ratio(n, delta, ctx.cfg.trials, ctx.cfg.seed);
            ctx.row({num(static_cast<long long>(n)), num(delta), num(r.ratio), num(r.probability),
                     num(r.rate), num(r.lambda_star), boolean(r.exact), num(r.standard_error)});
        }
    }
    return kOk;
}

std::string describe(const Distribution& p) {
    std::vector<double> v(p.mass().begin(), p.mass().end());
    return "p=" + join(v);
}

std::vector<BoundReport> suite_lemma5(const ExperimentConfig& cfg) {
    const auto rho = load_measure(cfg, default_size(cfg));
    const Distribution p = cfg.p.empty() ? Distribution::bernoulli(0.3) : source_law(cfg, rho);
    std::vector<BoundReport> out;
    for (int n : blocklengths(cfg)) {
        for (CoderKind kind : {CoderKind::prefix, CoderKind::non_prefix}) {
            ExperimentConfig local = cfg;
            local.coder = kind;
            const EmpiricalRate r = empirical_rate(p, rho, codec_config(local, rho, n), cfg.trials, cfg.seed);
            const std::string inputs = describe(p) + " d=" + csv_number(cfg.d) +
                                       " coder=" + std::string(to_string(kind)) +
                                       " trials=" + std::to_string(cfg.trials);
            out.push_back(BoundReport::check("converse_floor_" + std::string(to_string(kind)), n,
                                             inputs, r.expected_rd - r.converse_floor, r.mean_nats,
                                             BoundReport::Direction::bound_at_most,
                                             4.0 * r.standard_error));
            out.push_back(BoundReport::check("semifaithful_" + std::string(to_string(kind)), n,
                                             inputs, cfg.d, r.max_distortion,
                                             BoundReport::Direction::bound_at_least));
        }
    }
    return out;
}

std::vector<BoundReport> suite_lemma9(const ExperimentConfig& cfg) {
    const auto rho = DistortionMeasure::hamming(2);
    const double d_bar = cfg.d;
    const std::vector<int> ns = cfg.schedule.empty() ? std::vector<int>{10'000, 40'000} : cfg.schedule;
    std::vector<BoundReport> out;
    std::vector<double> scaled;
    const std::string inputs = "d_bar=" + csv_number(d_bar);
    for (int n : ns) {
        const ExactGap g = exact_gap(Distribution::bernoulli(d_bar), d_bar, rho, n);
        out.push_back(BoundReport::check("expected_gap_lower", n, inputs,
                                         gap_lower_bound_binary(d_bar, n), g.gap,
                                         BoundReport::Direction::bound_at_most));
        scaled.push_back(g.gap * std::sqrt(static_cast<double>(n)));
        const RestrictedFamilyGap f = restricted_family_gap(d_bar, n);
        out.push_back(BoundReport::check("restricted_family_lower", n, inputs, f.analytic_lower,
                                         f.exact.gap, BoundReport::Direction::bound_at_most));
        out.push_back(BoundReport::check("restricted_family_rate_ceiling", n, inputs,
                                         f.rate_ceiling, f.exact.rate,
                                         BoundReport::Direction::bound_at_least));
    }
    if (scaled.size() > 1) {
        const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
        out.push_back(BoundReport::check("gap_sqrt_n_band", ns.back(), inputs + " factor=3", 3.0,
                                         *lo > 0.0 ? *hi / *lo : INFINITY,
                                         BoundReport::Direction::bound_at_least));
    }
    return out;
}

std::vector<BoundReport> suite_taylor(const ExperimentConfig& cfg) {
    const auto rho = load_measure(cfg, 2);
    if (rho.J() != 2) throw InvalidInput("taylor suite: exact gaps need a binary source (J = 2)");
    const std::vector<double> p1s = cfg.p.empty() ? std::vector<double>{0.3, 0.5} : cfg.p;
    const std::vector<int> ns = cfg.schedule.empty()
                                    ? std::vector<int>{2'000, 4'000, 8'000, 16'000, 32'000}
                                    : cfg.schedule;
    const double a = cfg.a > 0.0 ? cfg.a : std::sqrt(2.0 * static_cast<double>(rho.J()) + 2.0);
    std::vector<BoundReport> out;
    for (double p1 : p1s) {
        const Distribution p = Distribution::bernoulli(p1);
        for (int n : ns) {
            const double bound = gap_upper_bound_taylor(rho, n, a);
            const ExactGap g = exact_gap(p, cfg.d, rho, n);
            out.push_back(BoundReport::check("expected_gap_upper", n,
                                             describe(p) + " d=" + csv_number(cfg.d) +
                                                 " a=" + csv_number(a),
                                             bound, std::abs(g.gap),
                                             BoundReport::Direction::bound_at_least));
        }
    }
    return out;
}

std::vector<BoundReport> suite_counterexample(const ExperimentConfig& cfg) {
    const std::vector<double> deltas =
        cfg.deltas.size() >= 2 ? cfg.deltas : std::vector<double>{1e-3, 1e-6};
    const std::vector<int> ns = cfg.schedule.empty() ? std::vector<int>{8} : cfg.schedule;
    std::vector<BoundReport> out;
    for (int n : ns) {
        std::vector<double> ratios;
        for (double delta : deltas) {
            const auto r = counterexample_ratio(n, delta, cfg.trials, cfg.seed);
            ratios.push_back(r.ratio);
            BoundReport row = BoundReport::check("ball_ratio", n, "delta=" + csv_number(delta),
                                                 uniform_ratio_bound(n, 2, 3, 1.0, 3.0), r.ratio,
                                                 BoundReport::Direction::bound_at_most);
            row.asserted = false;
            out.push_back(row);
        }
        out.push_back(BoundReport::check(
            "ratio_vanishes", n,
            "delta=" + csv_number(deltas.front()) + "->" + csv_number(deltas.back()) + " factor=0.1",
            0.1 * ratios.front(), ratios.back(), BoundReport::Direction::bound_at_least));
    }
    return out;
}

std::vector<BoundReport> suite_envelopes(const ExperimentConfig& cfg) {
    const auto rho = load_measure(cfg, default_size(cfg));
    const std::vector<int> ns = cfg.schedule.size() >= 2 ? cfg.schedule
                                                         : std::vector<int>{1'000, 1'000'000};
    std::vector<BoundReport> out;
    const std::string inputs = "J=" + std::to_string(rho.J()) + " K=" + std::to_string(rho.K()) +
                               " d=" + csv_number(cfg.d) + " rho_max=" + csv_number(rho.rho_max());
    for (Theorem which : {Theorem::one, Theorem::two, Theorem::three, Theorem::four}) {
        const std::string name = "envelope_thm" + std::to_string(static_cast<int>(which));
        const Envelope first = thm_envelope(which, ns.front(), rho.J(), rho.K(), cfg.d, rho.rho_max());
        const Envelope last = thm_envelope(which, ns.back(), rho.J(), rho.K(), cfg.d, rho.rho_max());
        BoundReport r = BoundReport::check(name + "_decay", ns.back(),
                                           inputs + " from_n=" + std::to_string(ns.front()) +
                                               (last.complete ? "" : " omitted=" + last.omitted),
                                           first.value, last.value,
                                           BoundReport::Direction::bound_at_least);
        r.asserted = first.complete && last.complete;
        out.push_back(r);
    }
    for (int n : ns) {
        out.push_back(BoundReport::check(
            "converse_floor_order", n, inputs, converse_floor(CoderKind::prefix, n, rho.J(), rho.K()),
            converse_floor(CoderKind::non_prefix, n, rho.J(), rho.K()),
            BoundReport::Direction::bound_at_most));
    }
    return out;
}

int cmd_verify_bounds(Context& ctx) {
    static const std::map<std::string, std::function<std::vector<BoundReport>(const ExperimentConfig&)>>
        suites = {{"lemma5", suite_lemma5},
                  {"lemma9", suite_lemma9},
                  {"taylor", suite_taylor},
                  {"counterexample", suite_counterexample},
                  {"envelopes", suite_envelopes}};
    const auto it = suites.find(ctx.cfg.suite);
    if (it == suites.end()) {
        throw InvalidInput("verify-bounds: suite must be one of lemma5, lemma9, taylor, "
                           "counterexample, envelopes (got '" + ctx.cfg.suite + "')");
    }
    const auto reports = it->second(ctx.cfg);
    ctx.header({"suite", "name", "n", "inputs", "bound_value", "compared_quantity", "direction",
                "tolerance", "satisfied", "slack", "asserted"});
    bool ok = true;
    for (const auto& r : reports) {
        ctx.row({ctx.cfg.suite, r.name, num(static_cast<long long>(r.n)), r.inputs,
                 num(r.bound_value), num(r.compared_quantity),
                 r.direction == BoundReport::Direction::bound_at_most ? "bound_at_most"
                                                                      : "bound_at_least",
                 num(r.tolerance), boolean(r.satisfied), num(r.slack), boolean(r.asserted)});
        if (r.asserted && !r.satisfied) {
            ctx.err << "bound violated: " << r.name << " at n=" << r.n << " (" << r.inputs << ")\n";
            ok = false;
        }
    }
    return ok ? kOk : kBoundViolated;
}

int cmd_sweep(Context& ctx) {
    const auto rho = load_measure(ctx.cfg, default_size(ctx.cfg));
    const auto p = source_law(ctx.cfg, rho);
    const std::vector<int> ns =
        ctx.cfg.schedule.empty() ? std::vector<int>{32, 64, 128, 256} : ctx.cfg.schedule;
    ctx.header({"n", "d", "coder", "empirical_rate_nats", "empirical_rate_bits", "standard_error",
                "expected_rd", "rd", "excess", "thm1_envelope", "lemma5_floor",
                "floor_satisfied", "envelope_satisfied", "max_distortion"});
    bool ok = true;
    std::vector<double> excess;
    for (int n : ns) {
        const EmpiricalRate r =
            empirical_rate(p, rho, codec_config(ctx.cfg, rho, n), ctx.cfg.trials, ctx.cfg.seed);
        const double ex = r.mean_nats - r.expected_rd;
        const bool floor_ok = r.mean_nats + 4.0 * r.standard_error >= r.expected_rd - r.converse_floor;
        const bool envelope_ok = ex <= r.envelope;
        ok = ok && floor_ok && r.max_distortion <= ctx.cfg.d;
        excess.push_back(ex);
        ctx.row({num(static_cast<long long>(n)), num(ctx.cfg.d), std::string(to_string(ctx.cfg.coder)),
                 num(r.mean_nats), num(r.mean_bits), num(r.standard_error), num(r.expected_rd),
                 num(r.rd), num(ex), num(r.envelope), num(r.converse_floor), boolean(floor_ok),
                 boolean(envelope_ok), num(r.max_distortion)});
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < excess.size(); ++i) decreasing = decreasing && excess[i] < excess[i - 1];
    ctx.err << "trend: excess " << csv_number(excess.front()) << " -> " << csv_number(excess.back())
            << (decreasing ? " (decreasing at every step)" : " (not monotone)") << '\n';
    if (excess.size() > 1 && !(excess.back() < excess.front())) {
        ctx.err << "bound violated: final excess is not below the initial excess\n";
        ok = false;
    }
    return ok ? kOk : kBoundViolated;
}

int dispatch(Context& ctx, std::ostream& out) {
    const std::string& sub = ctx.cfg.subcommand;
    if (sub == "rd") return cmd_rd(ctx);
    if (sub == "expected-rd") return cmd_expected_rd(ctx);
    if (sub == "shtarkov") return cmd_shtarkov(ctx);
    if (sub == "encode") return cmd_encode(ctx);
    if (sub == "decode") return cmd_decode(ctx, out);
    if (sub == "ball-prob") return cmd_ball_prob(ctx);
    if (sub == "counterexample") return cmd_counterexample(ctx);
    if (sub == "verify-bounds") return cmd_verify_bounds(ctx);
    if (sub == "sweep") return cmd_sweep(ctx);
    throw InvalidInput("unknown subcommand '" + sub + "'");
}

} // namespace

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
    std::string quoted = "\"";
    for (char c : text) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + '"';
}

std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);
    return buf;
}

const std::vector<std::string>& setting_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, setting] : settings()) k.push_back(name);
        return k;
    }();
    return keys;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                   const std::string& where) {
    for (const auto& [name, setting] : settings()) {
        if (name == key) {
            setting.set(cfg, trim(value), where + ": field '" + key + "'");
            return;
        }
    }
    throw InvalidInput(where + ": unknown field '" + key + "'");
}

void load_config(const std::string& path, ExperimentConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open config file '" + path + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = "config " + path + ":" + std::to_string(line_no);
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidInput(where + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (key == "subcommand") {
            cfg.subcommand = trim(line.substr(eq + 1));
            continue;
        }
        apply_setting(cfg, key, line.substr(eq + 1), where);
    }
}

std::string ExperimentConfig::canonical() const {
    std::string s = "subcommand = " + subcommand + "\n";
    for (const auto& [name, setting] : settings()) {
        if (name == "output") continue;
        s += name + " = " + setting.get(*this) + "\n";
    }
    return s;
}

std::string ExperimentConfig::digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

int run(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
    const bool csv_to_file =
        !cfg.output.empty() && cfg.subcommand != "encode" && cfg.subcommand != "decode";
    std::ofstream file;
    if (csv_to_file) {
        file.open(cfg.output);
        if (!file) {
            err << "error: cannot open output file '" << cfg.output << "'\n";
            return kBadInput;
        }
    }
    try {
        Context ctx{cfg, err, Csv(csv_to_file ? file : out), std::to_string(cfg.seed), cfg.digest()};
        return dispatch(ctx, out);
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const FramingError& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeFailure;
    }
}

} // namespace nmlrd::cli

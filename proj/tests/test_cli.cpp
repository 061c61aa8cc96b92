#include "nmlrd/cli.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nmlrd;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_with(cli::ExperimentConfig cfg) {
    std::ostringstream out, err;
    const int code = cli::run(cfg, out, err);
    return {code, out.str(), err.str()};
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / ("nmlrd_test_" + name);
    std::ofstream(path) << content;
    return path;
}

} // namespace

TEST_CASE("CSV formatting") {
    CHECK(cli::csv_number(0.1) == "0.1");
    CHECK(cli::csv_number(1.0 / 3.0) == "0.333333333333");
    CHECK(cli::csv_number(-0.0) == "0");
    CHECK(cli::csv_field("plain") == "plain");
    CHECK(cli::csv_field("a,b") == "\"a,b\"");
    CHECK(cli::csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("rd subcommand output") {
    cli::ExperimentConfig cfg;
    cfg.subcommand = "rd";
    cfg.p = {0.7, 0.3};
    cfg.d = 0.1;
    const auto r = run_with(cfg);
    CHECK(r.code == cli::kOk);
    CHECK(r.out.rfind("J,K,d,rate_nats,rate_bits", 0) == 0);
    CHECK(r.out.find("0.285781328") != std::string::npos);
}

TEST_CASE("malformed distortion file exits with code 2 naming the violation") {
    const auto path = temp_file("bad.dist", "J 2\nK 2\nrho_max 1\nentries 1 1\n 1 0\n");
    cli::ExperimentConfig cfg;
    cfg.subcommand = "rd";
    cfg.p = {0.5, 0.5};
    cfg.dist_path = path.string();
    const auto r = run_with(cfg);
    CHECK(r.code == cli::kBadInput);
    CHECK(r.err.find("no zero entry") != std::string::npos);
}

TEST_CASE("config files with flag overrides and diagnostics") {
    const auto path = temp_file("cfg.txt", "# sweep settings\np = 0.6, 0.4\nd = 0.2\nn = 12\n");
    cli::ExperimentConfig cfg;
    cli::load_config(path.string(), cfg);
    CHECK(cfg.p.size() == 2);
    CHECK(cfg.n == 12);
    cli::apply_setting(cfg, "n", "20", "flag");
    CHECK(cfg.n == 20);
    const auto bad = temp_file("cfg_bad.txt", "p = 0.5,0.5\nd = abc\n");
    try {
        cli::load_config(bad.string(), cfg);
        FAIL("expected rejection");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
        CHECK(std::string(e.what()).find("'d'") != std::string::npos);
    }
    CHECK_THROWS(cli::apply_setting(cfg, "colour", "red", "flag"));
    CHECK_THROWS(cli::apply_setting(cfg, "coder", "huffman", "flag"));
}

TEST_CASE("repeated runs are byte-identical") {
    cli::ExperimentConfig cfg;
    cfg.subcommand = "sweep";
    cfg.p = {0.7, 0.3};
    cfg.d = 0.25;
    cfg.schedule = {32, 64};
    cfg.trials = 20;
    cfg.seed = 5;
    const auto a = run_with(cfg);
    const auto b = run_with(cfg);
    CHECK(a.out == b.out);
    CHECK(a.out.find(cfg.digest()) != std::string::npos);
    cfg.seed = 6;
    CHECK(run_with(cfg).out != a.out);
}

TEST_CASE("sweep emits one row per blocklength with a decreasing excess") {
    cli::ExperimentConfig cfg;
    cfg.subcommand = "sweep";
    cfg.p = {0.7, 0.3};
    cfg.d = 0.25;
    cfg.trials = 50;
    const auto r = run_with(cfg);
    CHECK(r.code == cli::kOk);
    std::istringstream lines(r.out);
    std::string line;
    int rows = -1;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 4);
    CHECK(r.err.find("trend") != std::string::npos);
}

TEST_CASE("verify-bounds suites") {
    cli::ExperimentConfig cfg;
    cfg.subcommand = "verify-bounds";
    cfg.suite = "counterexample";
    auto r = run_with(cfg);
    CHECK(r.code == cli::kOk);
    CHECK(r.out.find("ratio_vanishes") != std::string::npos);
    cfg.suite = "envelopes";
    CHECK(run_with(cfg).code == cli::kOk);
    cfg.suite = "lemma9";
    cfg.schedule = {2000, 8000};
    CHECK(run_with(cfg).code == cli::kOk);
    cfg.suite = "nonsense";
    CHECK(run_with(cfg).code == cli::kBadInput);
}

TEST_CASE("encode and decode through container files") {
    const auto container = std::filesystem::temp_directory_path() / "nmlrd_test.bin";
    const auto recon = std::filesystem::temp_directory_path() / "nmlrd_test_recon.txt";
    cli::ExperimentConfig enc;
    enc.subcommand = "encode";
    enc.x = {0, 1, 1, 0, 0, 0, 1, 0, 1, 1, 0, 0, 0, 0, 1, 0};
    enc.n = 16;
    enc.d = 0.25;
    enc.seed = 3;
    enc.output = container.string();
    CHECK(run_with(enc).code == cli::kOk);

    cli::ExperimentConfig dec = enc;
    dec.subcommand = "decode";
    dec.x.clear();
    dec.input = container.string();
    dec.output = recon.string();
    CHECK(run_with(dec).code == cli::kOk);
    std::ifstream in(recon);
    int mismatches = 0;
    for (int v : enc.x) {
        int y = -1;
        in >> y;
        mismatches += y != v;
    }
    CHECK(mismatches <= 4);

    dec.seed = 4;
    CHECK(run_with(dec).code == cli::kBadInput);
}

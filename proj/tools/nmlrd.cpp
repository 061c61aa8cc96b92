#include "nmlrd/cli.hpp"
#include "nmlrd/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

namespace {

std::string flag_name(std::string key) {
    for (auto& c : key) {
        if (c == '_') c = '-';
    }
    return "--" + key;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Universal lossy coding experiments: rate-distortion, NML coding, bound checks"};
    app.require_subcommand(1);

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"rd", "R(p, d, rho) with its multiplier and certificate"},
        {"expected-rd", "E_p[R(T, d, rho)] over the n-type of an i.i.d. sample"},
        {"shtarkov", "ln S_n by type decomposition against its asymptote"},
        {"encode", "encode a source sequence into a container file"},
        {"decode", "decode a container file into a reconstruction"},
        {"ball-prob", "probability that a random codeword lands in the distortion ball"},
        {"counterexample", "ball-probability ratio for the two-letter counterexample"},
        {"verify-bounds", "check a suite of closed-form bounds; exit 1 on violation"},
        {"sweep", "empirical codec rate over a blocklength schedule"},
    };

    std::string config_path;
    std::map<std::string, std::string> values;
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "key = value configuration file (flags win)");
        for (const auto& key : nmlrd::cli::setting_keys()) {
            sub->add_option(flag_name(key), values[key], "configuration field '" + key + "'");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : nmlrd::cli::kBadInput;
    }

    nmlrd::cli::ExperimentConfig cfg;
    try {
        if (!config_path.empty()) nmlrd::cli::load_config(config_path, cfg);
        CLI::App* chosen = app.get_subcommands().front();
        cfg.subcommand = chosen->get_name();
        for (const auto& key : nmlrd::cli::setting_keys()) {
            if (chosen->count(flag_name(key)) > 0) {
                nmlrd::cli::apply_setting(cfg, key, values[key], "option " + flag_name(key));
            }
        }
    } catch (const nmlrd::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return nmlrd::cli::kBadInput;
    }
    return nmlrd::cli::run(cfg, std::cout, std::cerr);
}

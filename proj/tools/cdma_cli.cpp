#include "cdma/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

using cdma::cli::KeyValues;

// Raw flag text by config key; only flags actually given end up in the map.
struct FlagSet {
    std::map<std::string, std::string> text;
    std::optional<std::string> config;

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option(flag, text[key], help);
        keys.emplace_back(flag, key);
    }

    [[nodiscard]] KeyValues given(CLI::App* app) const {
        KeyValues kv;
        for (const auto& [flag, key] : keys) {
            if (app->count(flag.substr(0, flag.find(','))) > 0) kv[key] = cdma::cli::parse_value(text.at(key));
        }
        return kv;
    }

    std::vector<std::pair<std::string, std::string>> keys;
};

void add_common(CLI::App* app, FlagSet& f) {
    app->add_option("--config", f.config, "key = value config file; flags override it")->check(CLI::ExistingFile);
    f.add(app, "--prior", "prior", "gaussian | binary | discrete:[[x,p],...]");
    f.add(app, "--beta", "beta", "load K/L");
    f.add(app, "--sigma2-grid", "sigma2_grid", "noise variances lo:hi:n (log-spaced)");
    f.add(app, "--ebn0-grid", "ebn0_grid", "Eb/N0 in dB lo:hi:n (linear)");
    f.add(app, "--units", "units", "nats | bits");
    f.add(app, "--seed", "seed", "master seed");
    f.add(app, "--out", "out", "output file ('-' for stdout) or report directory");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Large-system mutual information of spread-spectrum channels"};
    app.require_subcommand(1);

    FlagSet sweep_flags;
    auto* sweep = app.add_subcommand("mi-sweep", "replica mutual information over a noise grid");
    add_common(sweep, sweep_flags);
    sweep_flags.add(sweep, "--spectrum", "spectrum", "comma list of mp, wbe or spectrum files");

    FlagSet verify_flags;
    auto* verify = app.add_subcommand("verify-optimality", "check WBE dominance over sampled spectra");
    add_common(verify, verify_flags);
    verify_flags.add(verify, "--candidates", "candidates", "number of sampled candidate spectra");
    verify_flags.add(verify, "--atoms", "atoms", "pi-atoms per candidate (0 varies 2..8)");
    verify_flags.add(verify, "--candidate", "candidate", "check this spectrum file instead of sampling");

    FlagSet sim_flags;
    auto* simulate = app.add_subcommand("simulate", "finite-size mutual information by enumeration");
    add_common(simulate, sim_flags);
    sim_flags.add(simulate, "-K,--users", "K", "users");
    sim_flags.add(simulate, "-L,--chips", "L", "spreading gain");
    sim_flags.add(simulate, "--kinds", "kinds", "comma list of iid, wbe");
    sim_flags.add(simulate, "--samples", "samples", "Monte Carlo samples per matrix");
    sim_flags.add(simulate, "--matrices", "matrices", "spreading matrices averaged per row");

    FlagSet transform_flags;
    auto* transform = app.add_subcommand("transform", "tabulate R, G and the Hilbert transform");
    add_common(transform, transform_flags);
    transform_flags.add(transform, "--spectrum", "spectrum", "mp, wbe or a spectrum file");
    transform_flags.add(transform, "--z-grid", "z_grid", "negative z values lo:hi:n (log-spaced)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cdma::cli::exit_usage;
    }

    auto run = [&](CLI::App* sub, const FlagSet& flags, auto command) {
        return cdma::cli::guarded(
            [&] {
                const auto cfg = cdma::cli::load_config(flags.config, flags.given(sub));
                return command(cfg, std::cout, std::cerr);
            },
            std::cerr);
    };
    if (*sweep) return run(sweep, sweep_flags, cdma::cli::run_mi_sweep);
    if (*verify) return run(verify, verify_flags, cdma::cli::run_verify_optimality);
    if (*simulate) return run(simulate, sim_flags, cdma::cli::run_simulate);
    return run(transform, transform_flags, cdma::cli::run_transform);
}

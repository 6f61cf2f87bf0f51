// Command-line front end: stampacchia run <config.json> [--out DIR] [--seed N] [--quiet]

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stampacchia/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Level-set iteration lemmas and degenerate elliptic regularity experiments"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
    std::string config;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool quiet = false;
    run->add_option("config", config, "Experiment config (JSON)")->required();
    auto* out_opt = run->add_option("--out", out_dir, "Output directory (overrides the config)");
    auto* seed_opt = run->add_option("--seed", seed, "Random seed (overrides the config)");
    run->add_flag("--quiet", quiet, "Suppress progress output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        // Usage errors share the input-error exit code; --help stays 0.
        return rc == 0 ? 0 : stampacchia::experiment::kExitInputError;
    }

    stampacchia::experiment::RunOptions opt;
    if (*out_opt) opt.out_dir = out_dir;
    if (*seed_opt) opt.seed = seed;
    opt.quiet = quiet;
    return stampacchia::experiment::run_file(config, opt, std::cout, std::cerr);
}

#pragma once

// Configuration-driven experiment runner. One JSON config describes one
// experiment; reports are written as JSON/CSV into an output directory.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stampacchia/lemma_engine.hpp"
#include "stampacchia/pde_solver.hpp"
#include "stampacchia/regularity.hpp"

namespace stampacchia::experiment {

// -- randomized lemma suite ------------------------------------------------

/// Uniform double in [0, 1) from the top 53 bits, independent of the
/// standard library's distribution implementations.
inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// c in [0.1, 10], alpha in [0.5, 4], theta in [0, 0.9], k0 in [0.5, 5],
/// phi0 in [0, 10]; beta in [1.1, 3], {1} or [0.1, 0.9] by regime.
lemma::LemmaParams random_lemma_params(lemma::Regime regime, std::mt19937_64& rng);

struct OracleCase {
    lemma::LemmaParams params;
    lemma::Variant variant = lemma::Variant::generalized;
    lemma::VerificationReport verification;
    double tolerance = 0.0;                     // 1e-9 phi0 + 1e-12
    std::optional<double> value_at_vanishing;   // beta > 1 only
    bool passed = false;
};

/// Domination check of one tuple: oracle <= bound within tolerance and, for
/// beta > 1, oracle at the vanishing level < 1e-10 phi0.
OracleCase check_oracle(const lemma::LemmaParams& p, lemma::Variant v, std::size_t grid_count = 4000);

/// `tuples` random tuples per regime, shared by all variants. Regime r uses
/// the generator seeded with seed + r.
std::vector<OracleCase> run_oracle_suite(std::span<const lemma::Variant> variants,
                                         std::span<const lemma::Regime> regimes, std::size_t tuples,
                                         std::uint64_t seed);

// -- configuration ---------------------------------------------------------

enum class Mode { lemma_bound, lemma_verify, solve, analyze, sweep };

std::string_view to_string(Mode m);

struct LemmaBlock {
    lemma::LemmaParams params;
    std::vector<lemma::Variant> variants;  // all three when the config names none
    std::size_t grid_count = 4000;
};

struct SuiteBlock {
    std::size_t tuples = 200;
    std::vector<lemma::Variant> variants{lemma::Variant::generalized};
    std::vector<lemma::Regime> regimes{lemma::Regime::vanishing, lemma::Regime::exponential,
                                       lemma::Regime::power_law};
};

struct SolverBlock {
    pde::CoefficientSpec coefficient;
    pde::SourceSpec source;
    std::vector<int> grids{32};
    pde::SolverConfig config;
};

struct AnalysisBlock {
    regularity::AnalysisOptions options;
    std::optional<double> m;  // source exponent; defaults to the radial source's m
};

struct SweepBlock {
    std::vector<double> m;
    std::vector<double> theta;
    std::vector<int> grids;
};

struct ExperimentConfig {
    Mode mode = Mode::lemma_bound;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "out";
    std::optional<LemmaBlock> lemma;
    std::optional<SuiteBlock> suite;
    std::optional<SolverBlock> solver;
    std::optional<AnalysisBlock> analysis;
    std::optional<SweepBlock> sweep;
    nlohmann::json raw;  // the document as read, echoed into reports
};

/// Strict parsing: unknown keys, wrong types, out-of-domain values and
/// missing blocks for the chosen mode throw InputError naming the field.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

// -- running ---------------------------------------------------------------

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerificationFailed = 1;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitSolverFailure = 3;

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;  // overrides the config
    std::optional<std::uint64_t> seed;             // overrides the config
    bool quiet = false;
};

/// Runs a parsed experiment and returns its exit code. Progress goes to
/// `log` unless quiet.
int run(ExperimentConfig cfg, const RunOptions& opt, std::ostream& log);

/// Loads, validates and runs; every error is mapped to an exit code with a
/// diagnostic on `err`.
int run_file(const std::filesystem::path& config, const RunOptions& opt, std::ostream& log,
             std::ostream& err);

}  // namespace stampacchia::experiment

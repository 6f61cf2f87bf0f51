#pragma once

// JSON and CSV serialization of lemma, solver and regularity results.
// Every report carries "schema_version": "1".

#include <filesystem>
#include <iosfwd>
#include <optional>

#include <json.hpp>

#include "stampacchia/lemma_engine.hpp"
#include "stampacchia/pde_solver.hpp"
#include "stampacchia/regularity.hpp"

namespace stampacchia::report {

using nlohmann::json;

inline constexpr const char* kSchemaVersion = "1";

json to_json(const lemma::LemmaParams& p);
json to_json(const lemma::DecayBound& b);
json to_json(const lemma::BoundConstants& c);
json to_json(const lemma::VerificationReport& v);

/// {params, variant, bound, constants, verification}
json lemma_report(const lemma::LemmaParams& p, lemma::Variant v, const lemma::DecayBound& bound,
                  const std::optional<lemma::VerificationReport>& verification = std::nullopt);

json to_json(const pde::CoefficientSpec& c);
json to_json(const pde::SolverConfig& c);
json to_json(const pde::PicardResult& r);  // convergence summary, no field data

json to_json(const regularity::DistributionFunction& d);
json to_json(const regularity::ExponentTable& x);
json to_json(const regularity::EnergyCheck& e);
json to_json(const regularity::RegularityReport& r);

/// {schema_version, config, exponent_table, verdicts, ...}
json regularity_report(const regularity::RegularityReport& r, const json& config);

/// Two columns "level,measure", LF line endings.
void write_distribution_csv(const regularity::DistributionFunction& d, std::ostream& os);

/// True when every number in `j` is finite. nlohmann writes non-finite
/// numbers as null, so callers check this before writing.
bool all_finite(const json& j);

/// Pretty-printed with two-space indent and a trailing newline.
void write_json(const json& j, const std::filesystem::path& path);

/// Fixed-format number for CSV cells: shortest round-trip representation.
std::string format_number(double v);

}  // namespace stampacchia::report

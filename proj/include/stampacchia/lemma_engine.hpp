#pragma once

// Level-set iteration lemmas of Stampacchia type.
//
// Every lemma starts from a nonincreasing phi on [k0, +inf) satisfying
//
//     phi(h) <= c * w(h, k) / (h - k)^alpha * phi(k)^beta,   h > k >= k0,
//
// where the weight w is 1 (classical), k^(theta*alpha) (kv) or
// h^(theta*alpha) (generalized). Depending on beta the conclusion is a
// vanishing level (beta > 1), exponential decay (beta = 1) or power-law
// decay (0 < beta < 1). The extremal oracle builds the largest grid function
// compatible with the hypothesis so that the closed-form conclusions can be
// checked against it.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace stampacchia::lemma {

enum class Variant { classical, kv, generalized };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view name);

enum class Regime { vanishing, exponential, power_law };

std::string_view to_string(Regime r);

/// Parameters shared by all lemma variants.
struct LemmaParams {
    double c = 1.0;
    double alpha = 1.0;
    double beta = 1.0;
    double theta = 0.0;
    double k0 = 1.0;
    double phi0 = 1.0;
};

/// Throws DomainError unless `p` is admissible for `v`.
///
/// The classical lemma accepts any real k0 when beta >= 1; every other case
/// needs k0 > 0. theta is ignored by the classical variant.
void validate(const LemmaParams& p, Variant v);

Regime regime_of(double beta);

struct VanishingLevel {
    double level;
};

/// phi(k) <= phi0 * exp(1 - ((k - base_level) / tau)^(1 - theta))
struct ExponentialDecay {
    double tau;
    double theta;
    double base_level;
    double phi0;
};

/// phi(k) <= coefficient * k^(-exponent)
struct PowerLawDecay {
    double coefficient;
    double exponent;
};

struct BoundConstants {
    std::optional<double> L;
    std::optional<double> tau;
    std::optional<double> c1;
    std::optional<double> c2;
    std::optional<double> c4;
    std::optional<double> c5;
    std::optional<double> d;
};

struct DecayBound {
    std::variant<VanishingLevel, ExponentialDecay, PowerLawDecay> shape;
    BoundConstants constants;
    // Set when a constant exceeded the double range; the affected values are
    // saturated at the largest finite double.
    bool overflow = false;

    Regime regime() const;

    /// Bound value at level k. A vanishing level yields +inf below the level
    /// and 0 at or above it.
    double evaluate(double k) const;
};

DecayBound classical_bound(const LemmaParams& p);
DecayBound kv_bound(const LemmaParams& p);
DecayBound generalized_bound(const LemmaParams& p);
DecayBound bound_for(const LemmaParams& p, Variant v);

/// Vanishing level constant L for beta > 1; phi(2L) = 0.
double compute_L(const LemmaParams& p);

/// Exponential-decay scale tau for beta = 1.
double compute_tau(const LemmaParams& p);

struct PowerConstants {
    double c1;
    double c2;
};

/// c1 and c2 of the power-law conclusion, 0 < beta < 1.
PowerConstants compute_power_constants(const LemmaParams& p);

// -- iteration lemma -------------------------------------------------------

struct IterationParams {
    double C = 1.0;
    double B = 2.0;
    double beta = 2.0;
    double x0 = 0.0;
};

struct IterationResult {
    std::vector<double> sequence;  // x_0 .. x_n, truncated at the last finite value on overflow
    bool converged = false;        // x0 below the smallness threshold
    bool overflow = false;
    double threshold = 0.0;        // C^(-1/(beta-1)) * B^(-1/(beta-1)^2)

    /// B^(-i/(beta-1)) * x0
    double envelope(std::size_t i, const IterationParams& q) const;
};

/// Saturating recursion x_{i+1} = C * B^i * x_i^beta for i < n_steps.
IterationResult iteration_limit(const IterationParams& q, std::size_t n_steps);

// -- doubling transfer -----------------------------------------------------

struct DoublingConstants {
    double c4;
    double c5;
};

/// Converts phi(2k) <= c3 k^(-alpha_tilde) phi(k)^beta into the difference
/// form phi(h) <= c4 (h-k)^(-alpha_tilde) phi(k)^beta.
DoublingConstants doubling_transfer(double c3, double alpha_tilde, double beta, double k0,
                                    double phi0);

// -- extremal oracle -------------------------------------------------------

/// Nonincreasing grid function; between grid points it is extended as a
/// right-continuous step function.
struct LevelFunction {
    std::vector<double> levels;
    std::vector<double> values;

    /// Value at the largest grid level <= k (values.front() below the grid).
    double at(double k) const;
};

/// Right-hand side of the hypothesis of variant `v`.
double hypothesis_rhs(const LemmaParams& p, Variant v, double h, double k, double phi_k);

/// `count` levels in geometric progression from k0 to k_max inclusive.
std::vector<double> geometric_levels(double k0, double k_max, std::size_t count);

/// Ascending level grid made of a geometric backbone k0 * r^b, b = 0..nb-1,
/// plus optional extra levels in between. The backbone lets the oracle use a
/// multiply-only inner loop; extra levels go through the direct formula.
struct LevelGrid {
    std::vector<double> levels;
    double log_ratio = 0.0;                 // log r of the backbone, 0 when absent
    std::vector<std::ptrdiff_t> backbone;   // backbone index per level, -1 for extras

    static LevelGrid from_levels(std::span<const double> levels);
    std::size_t size() const { return levels.size(); }
};

/// Default oracle grid: 4000 geometric levels up to k_max = 4 * vanishing
/// level for beta > 1 (the level itself lies on the backbone), 1000 * k0
/// otherwise; the level chains used by the lemma proofs are merged in as
/// extra levels.
LevelGrid default_level_grid(const LemmaParams& p, Variant v, std::size_t count = 4000);

/// Pointwise-largest nonincreasing grid function with phi(k0) = phi0 that
/// satisfies the hypothesis of `v` for every pair of grid levels.
///
/// Throws InputError when the grid is not strictly ascending or does not
/// start at k0.
LevelFunction extremal_level_function(const LemmaParams& p, Variant v, const LevelGrid& grid);
LevelFunction extremal_level_function(const LemmaParams& p, Variant v,
                                      std::span<const double> level_grid);

/// Same construction evaluating every pair with hypothesis_rhs (reference route).
LevelFunction extremal_level_function_direct(const LemmaParams& p, Variant v,
                                             std::span<const double> level_grid);

struct VerificationReport {
    double max_violation = 0.0;
    double worst_level = 0.0;
    std::size_t compared = 0;
};

VerificationReport verify_bound(const LevelFunction& level_fn, const DecayBound& bound);

}  // namespace stampacchia::lemma

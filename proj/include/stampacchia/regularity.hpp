#pragma once

// Distribution-function analysis of computed solutions: super-level set
// measures, weak-norm estimates, the discrete energy inequality behind the
// level-set recursion, and a regime classification by source exponent m.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stampacchia/grid_field.hpp"
#include "stampacchia/lemma_engine.hpp"
#include "stampacchia/pde_solver.hpp"

namespace stampacchia::regularity {

/// measures[j] = |{|u| > levels[j]}|.
struct DistributionFunction {
    std::vector<double> levels;
    std::vector<double> measures;
};

DistributionFunction distribution_function(const pde::GridField& u, std::span<const double> levels);

/// `count` geometric levels from low_fraction * sup|u| to sup|u|; empty
/// when u vanishes identically.
std::vector<double> default_levels(const pde::GridField& u, std::size_t count = 64,
                                   double low_fraction = 0.01);

/// max_j levels[j]^p * measures[j]
double weak_norm_estimate(const DistributionFunction& d, double p);

struct PowerFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};

/// Least squares of log|A_k| against log k over positive measures with
/// k_min <= k <= k_max. Throws FitError with fewer than 5 points.
PowerFit fit_power_exponent(const DistributionFunction& d, double k_min, double k_max);

enum class Regime { bounded, exponential, weak_power, entropy_weak_power };

std::string_view to_string(Regime r);

struct ExponentTable {
    int n = 3;
    double m = 2.0;
    double theta = 0.0;
    double two_star = 0.0;        // 2n/(n-2)
    double two_star_prime = 0.0;  // 2n/(n+2)
    double m_prime = 0.0;         // m/(m-1)
    std::optional<double> m_double_star;       // nm/(n-2m), m < n/2
    std::optional<double> predicted_exponent;  // m** (1 - theta)
    Regime regime = Regime::bounded;
    double recursion_alpha = 0.0;  // 2*/2
    double recursion_beta = 0.0;   // 2*/(2m')
    double recursion_theta = 0.0;
};

/// Throws DomainError for m <= 1, n <= 2 or theta outside [0, 1).
/// m = (2*)' is classified with the entropy regime.
ExponentTable exponent_table(int n, double m, double theta);

/// Largest |A_h| (h-k)^alpha / (h^(theta alpha) |A_k|^beta) over level pairs
/// with k >= k_floor and h >= min_ratio * k, using the recursion exponents of
/// the table. Pairs with |A_k| = 0 contribute 0. Throws FitError when no pair
/// is admissible.
double levelset_recursion_fit(const DistributionFunction& d, const ExponentTable& x,
                              double min_ratio = 1.5, double k_floor = 1.0);

struct EnergyCheck {
    double k = 0.0;
    double h = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;  // rhs - lhs
};

/// Discrete form of
///   alpha int_{k<|u|<=h} |Du|^2 / (1+|u|)^theta  <=  int_{|u|>k} f T_{h-k}(G_k(u)),
/// with face differences, the face-averaged lower envelope and cell-volume
/// quadrature.
EnergyCheck energy_inequality_check(const pde::GridField& u, const pde::GridField& f,
                                    const pde::CoefficientSpec& coeff, double k, double h,
                                    pde::FaceAverage average = pde::FaceAverage::harmonic);

/// Discrete form of int a(x,u) Du D T_ell(u - T_k(u)) <= int f T_ell(u - T_k(u))
/// with ell = h - k, using the solver's own face coefficients.
EnergyCheck entropy_inequality_check(const pde::GridField& u, const pde::GridField& f,
                                     const pde::CoefficientSpec& coeff, double k, double h,
                                     pde::FaceAverage average = pde::FaceAverage::harmonic);

/// `count` pairs 0 < k < h drawn from a seeded generator, k uniform in
/// (0, sup_u) and h uniform in (k, sup_u]. Empty when sup_u == 0.
std::vector<std::pair<double, double>> sample_level_pairs(double sup_u, std::size_t count,
                                                          std::uint64_t seed);

struct ExpIntegrabilityParams {
    double tau = 1.0;
    double lambda = 0.0;
    double theta = 0.0;

    /// |2^(2-theta) lambda tau^(1-theta) - 1|
    double identity_error() const;
};

/// lambda from 2^(2-theta) lambda = tau^(theta-1).
ExpIntegrabilityParams exp_integrability_params(double tau, double theta);

struct SeriesCheck {
    double sum = 0.0;
    bool converged = false;
    std::size_t terms = 0;
};

/// Partial sum of k^(r-1) |{|g| > k}| over the levels of d_g (integer levels
/// expected, 0^0 = 1). Converged when a measure reaches 0 or the last term
/// is below 1e-12.
SeriesCheck series_integrability_check(const DistributionFunction& d_g, double r);

/// Distribution of g = exp(lambda |u|^(1-theta)) on the integer levels
/// 0 .. ceil(max g).
DistributionFunction exp_distribution(const pde::GridField& u, const ExpIntegrabilityParams& e);

// -- verdict ---------------------------------------------------------------

struct AnalysisOptions {
    std::size_t level_count = 64;
    double low_fraction = 0.01;
    double pair_ratio = 1.5;
    double k_floor = 1.0;
    std::size_t energy_pairs = 20;
    double energy_slack = 0.05;
    double sup_stability = 0.05;
    double stability_factor = 2.0;
    std::uint64_t seed = 1;
};

/// One computed solution together with its source samples.
struct GridSolution {
    pde::GridField u;
    pde::GridField f;
};

struct NamedCheck {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool passed = false;
};

struct GridAnalysis {
    int n = 0;
    double sup_u = 0.0;
    DistributionFunction distribution;
    std::optional<double> weak_norm;        // at the predicted exponent
    std::optional<PowerFit> fit;            // tail slope
    std::optional<double> recursion_constant;
    std::vector<EnergyCheck> energy;
    std::vector<EnergyCheck> entropy;       // entropy regimes only
};

struct RegularityReport {
    ExponentTable table;
    std::vector<GridAnalysis> grids;
    std::optional<lemma::DecayBound> lemma_bound;  // generalized lemma with the fitted constant
    std::optional<lemma::LemmaParams> lemma_params;
    std::optional<ExpIntegrabilityParams> exp_params;
    std::optional<SeriesCheck> series;
    std::vector<NamedCheck> checks;

    bool passed() const;
};

/// Analyses one or more solutions of the same problem (ascending grid size)
/// and evaluates the regime's checks. Two-grid stability checks use the last
/// two solutions and are skipped with a single grid.
RegularityReport regime_verdict(std::span<const GridSolution> solutions, const ExponentTable& x,
                                const pde::CoefficientSpec& coeff, const AnalysisOptions& opt,
                                pde::FaceAverage average = pde::FaceAverage::harmonic);

}  // namespace stampacchia::regularity

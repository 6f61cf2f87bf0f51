#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "stampacchia/errors.hpp"
#include "stampacchia/regularity.hpp"

using namespace stampacchia;
using namespace stampacchia::regularity;
using pde::GridField;

namespace {

DistributionFunction power_distribution(double p, double c, double k_lo, double k_hi, std::size_t count) {
    DistributionFunction d;
    for (std::size_t j = 0; j < count; ++j) {
        const double k = k_lo * std::pow(k_hi / k_lo, static_cast<double>(j) / static_cast<double>(count - 1));
        d.levels.push_back(k);
        d.measures.push_back(c * std::pow(k, -p));
    }
    return d;
}

// |u| = |x - c|^-1 about the cube centre.
GridField radial_proxy(int n) {
    GridField u(n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const auto x = u.center(i, j, k);
                u(i, j, k) = 1.0 / std::hypot(x[0] - 0.5, x[1] - 0.5, x[2] - 0.5);
            }
    return u;
}

pde::CoefficientSpec envelope(double theta) {
    pde::CoefficientSpec c;
    c.theta = theta;
    return c;
}

pde::SourceSpec radial(double m) {
    pde::SourceSpec s;
    s.m = m;
    return s;
}

}  // namespace

TEST_CASE("distribution function") {
    const GridField half(4, 0.5);
    const std::vector<double> lv{0.25, 0.75};
    const auto d = distribution_function(half, lv);
    CHECK(d.measures[0] == 1.0);
    CHECK(d.measures[1] == 0.0);

    const std::vector<double> above{half.max_abs() * 1.01};
    CHECK(distribution_function(half, above).measures[0] == 0.0);

    const std::vector<double> bad{0.5, 0.25};
    CHECK_THROWS_AS(distribution_function(half, bad), DomainError);
    CHECK(default_levels(GridField(4)).empty());
}

TEST_CASE("distribution of the radial proxy") {
    const auto u = radial_proxy(64);
    std::vector<double> levels;
    for (int j = 0; j <= 20; ++j) levels.push_back(2.0 * std::pow(4.0, j / 20.0));
    const auto d = distribution_function(u, levels);
    for (std::size_t j = 0; j < levels.size(); ++j) {
        const double exact = 4.0 * std::numbers::pi / 3.0 * std::pow(levels[j], -3.0);
        CHECK(std::abs(d.measures[j] - exact) <= 0.10 * exact);
    }
    const auto fit = fit_power_exponent(d, 2.0, 8.0);
    CHECK(std::abs(fit.slope + 3.0) <= 0.3);
}

TEST_CASE("distribution function properties") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    GridField f(10);
    for (auto& x : f.values()) x = u(rng);
    const auto levels = default_levels(f);
    REQUIRE(levels.size() == 64);
    const auto d = distribution_function(f, levels);
    for (std::size_t j = 1; j < d.measures.size(); ++j) CHECK(d.measures[j] <= d.measures[j - 1]);
    CHECK(d.measures.front() <= 1.0);

    // Scaling u by lambda maps |A_k| to |A_{k/lambda}| of the original.
    for (double lambda : {0.25, 2.0, 8.0}) {
        GridField g = f;
        for (auto& x : g.values()) x *= lambda;
        std::vector<double> scaled;
        for (double k : levels) scaled.push_back(k * lambda);
        const auto dg = distribution_function(g, scaled);
        for (std::size_t j = 0; j < levels.size(); ++j) CHECK(dg.measures[j] == d.measures[j]);
    }
}

TEST_CASE("weak norm estimate") {
    DistributionFunction zero{{1.0, 2.0}, {0.0, 0.0}};
    CHECK(weak_norm_estimate(zero, 2.0) == 0.0);

    const GridField one(4, 1.0);
    const std::vector<double> lv{0.5, 0.9, 1.5};
    CHECK(weak_norm_estimate(distribution_function(one, lv), 2.0) == doctest::Approx(0.81));

    const auto exact = power_distribution(4.875, 1.0, 1.0, 100.0, 40);
    CHECK(weak_norm_estimate(exact, 4.875) == doctest::Approx(1.0).epsilon(1e-12));

    auto scaled = exact;
    for (auto& m : scaled.measures) m *= 3.0;
    CHECK(weak_norm_estimate(scaled, 4.875) == doctest::Approx(3.0).epsilon(1e-12));

    std::mt19937_64 rng(8);
    for (int t = 0; t < 50; ++t) {
        auto bumped = exact;
        bumped.measures[rng() % bumped.measures.size()] *= 1.5;
        CHECK(weak_norm_estimate(bumped, 4.875) >= weak_norm_estimate(exact, 4.875));
    }
}

TEST_CASE("power fit") {
    for (double p : {1.0, 2.0, 3.0, 4.875}) {
        for (double c : {1.0, 0.37}) {
            const auto fit = fit_power_exponent(power_distribution(p, c, 1.0, 50.0, 30), 1.0, 50.0);
            CHECK(std::abs(fit.slope + p) < 1e-10);
            CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    const auto few = power_distribution(3.0, 1.0, 1.0, 2.0, 4);
    CHECK_THROWS_AS(fit_power_exponent(few, 1.0, 2.0), FitError);
}

TEST_CASE("exponent table") {
    const auto b = exponent_table(3, 2.0, 0.3);
    CHECK(b.two_star == 6.0);
    CHECK(b.two_star_prime == 1.2);
    CHECK(b.m_prime == 2.0);
    CHECK(b.regime == Regime::bounded);
    CHECK_FALSE(b.predicted_exponent);

    CHECK(exponent_table(3, 1.5, 0.5).regime == Regime::exponential);

    const auto w = exponent_table(3, 1.3, 0.5);
    CHECK(w.regime == Regime::weak_power);
    CHECK(*w.m_double_star == doctest::Approx(9.75).epsilon(1e-14));
    CHECK(*w.predicted_exponent == doctest::Approx(4.875).epsilon(1e-14));
    CHECK(w.recursion_alpha == 3.0);
    CHECK(w.recursion_beta == doctest::Approx(3.0 * 0.3 / 1.3));

    CHECK(exponent_table(3, 1.2, 0.0).regime == Regime::entropy_weak_power);
    CHECK(exponent_table(3, 1.1, 0.0).regime == Regime::entropy_weak_power);
    // The regime depends on (n, m) only.
    for (double theta : {0.0, 0.4, 0.9}) CHECK(exponent_table(3, 1.25, theta).regime == Regime::weak_power);
    CHECK_THROWS_AS(exponent_table(3, 1.0, 0.0), DomainError);
    CHECK_THROWS_AS(exponent_table(3, 2.0, 1.0), DomainError);
}

TEST_CASE("level-set recursion fit") {
    const auto x = exponent_table(3, 1.3, 0.5);
    DistributionFunction vanished{{1.0, 2.0, 3.0, 4.0}, {0.0, 0.0, 0.0, 0.0}};
    CHECK(levelset_recursion_fit(vanished, x) == 0.0);

    DistributionFunction ex;
    for (int j = 0; j <= 90; ++j) {
        const double k = 1.0 + j * 0.1;
        ex.levels.push_back(k);
        ex.measures.push_back(std::exp(-k));
    }
    const double c = levelset_recursion_fit(ex, x);
    CHECK(std::isfinite(c));
    CHECK(c > 0.0);
    // Brute force over the same pairs.
    double brute = 0.0;
    for (std::size_t i = 0; i < ex.levels.size(); ++i)
        for (std::size_t j = 0; j < ex.levels.size(); ++j) {
            const double k = ex.levels[i], h = ex.levels[j];
            if (h < 1.5 * k) continue;
            brute = std::max(brute, ex.measures[j] * std::pow(h - k, 3.0) /
                                        (std::pow(h, 1.5) * std::pow(ex.measures[i], x.recursion_beta)));
        }
    CHECK(c == doctest::Approx(brute).epsilon(1e-14));

    DistributionFunction below{{0.1, 0.5}, {0.5, 0.1}};
    CHECK_THROWS_AS(levelset_recursion_fit(below, x), FitError);
}

TEST_CASE("energy inequality") {
    const auto coeff = envelope(0.5);
    SUBCASE("levels above the solution") {
        const auto r = pde::picard_solve(coeff, radial(2.0), 12, {});
        const double sup = r.u.max_abs();
        const auto e = energy_inequality_check(r.u, r.f, coeff, sup, 2.0 * sup);
        CHECK(e.lhs == 0.0);
        CHECK(e.rhs == 0.0);
        CHECK(e.residual == 0.0);
    }
    SUBCASE("zero source") {
        const GridField z(8);
        for (const auto& [k, h] : sample_level_pairs(1.0, 10, 1)) {
            CHECK(energy_inequality_check(z, z, coeff, k, h).residual == 0.0);
        }
    }
    SUBCASE("converged bounded-regime solve") {
        const auto r = pde::picard_solve(coeff, radial(2.0), 32, {});
        const auto pairs = sample_level_pairs(r.u.max_abs(), 20, 3);
        REQUIRE(pairs.size() == 20);
        for (const auto& [k, h] : pairs) {
            REQUIRE(0.0 < k);
            REQUIRE(k < h);
            const auto e = energy_inequality_check(r.u, r.f, coeff, k, h);
            CHECK(e.residual >= -0.05 * std::abs(e.rhs));
            // The entropy form holds with equality up to the Picard and CG tolerances.
            const auto s = entropy_inequality_check(r.u, r.f, coeff, k, h);
            CHECK(s.residual >= -0.05 * std::abs(s.rhs));
            CHECK(std::abs(s.residual) <= 1e-4 * std::abs(s.rhs) + 1e-14);
        }
    }
    SUBCASE("domain errors") {
        const GridField z(4);
        CHECK_THROWS_AS(energy_inequality_check(z, z, coeff, 1.0, 1.0), DomainError);
        CHECK_THROWS_AS(energy_inequality_check(z, GridField(5), coeff, 1.0, 2.0), InputError);
    }
}

TEST_CASE("level pair sampling is deterministic") {
    CHECK(sample_level_pairs(3.0, 20, 9) == sample_level_pairs(3.0, 20, 9));
    CHECK(sample_level_pairs(3.0, 20, 9) != sample_level_pairs(3.0, 20, 10));
    CHECK(sample_level_pairs(0.0, 20, 9).empty());
}

TEST_CASE("exp integrability parameters") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> tau(0.5, 50.0), th(0.0, 0.95);
    for (int t = 0; t < 200; ++t) {
        const auto e = exp_integrability_params(tau(rng), th(rng));
        CHECK(e.identity_error() <= 1e-12);
    }
    CHECK(exp_integrability_params(1.0, 0.0).lambda == 0.25);
}

TEST_CASE("series criterion") {
    DistributionFunction bounded{{0, 1, 2, 3}, {1.0, 0.5, 0.0, 0.0}};
    const auto b = series_integrability_check(bounded, 1.0);
    CHECK(b.converged);
    CHECK(b.sum == 1.5);

    DistributionFunction sq, harmonic;
    const std::size_t n = 2000000;
    for (std::size_t k = 1; k <= n; ++k) {
        const double kd = static_cast<double>(k);
        sq.levels.push_back(kd);
        sq.measures.push_back(0.3 / (kd * kd));
        harmonic.levels.push_back(kd);
        harmonic.measures.push_back(1.0 / kd);
    }
    const auto s = series_integrability_check(sq, 1.0);
    CHECK(s.converged);
    CHECK(s.sum == doctest::Approx(0.3 * std::numbers::pi * std::numbers::pi / 6.0).epsilon(1e-6));
    CHECK_FALSE(series_integrability_check(harmonic, 1.0).converged);
    CHECK_THROWS_AS(series_integrability_check(sq, 0.5), DomainError);
}

TEST_CASE("regime verdict on the zero field passes vacuously") {
    const GridField z(8);
    const std::vector<GridSolution> sols{{z, z}, {z, z}};
    for (double m : {2.0, 1.5, 1.3, 1.1}) {
        INFO("m = " << m);
        const auto rep = regime_verdict(sols, exponent_table(3, m, 0.5), envelope(0.5), AnalysisOptions{});
        CHECK(rep.passed());
        CHECK(rep.grids.front().sup_u == 0.0);
    }
}

TEST_CASE("regime verdict on small solves") {
    const auto coeff = envelope(0.5);
    SUBCASE("exponential regime builds lambda from tau") {
        const auto r = pde::picard_solve(coeff, radial(1.5), 16, {});
        const std::vector<GridSolution> sols{{r.u, r.f}};
        const auto rep = regime_verdict(sols, exponent_table(3, 1.5, 0.5), coeff, AnalysisOptions{});
        REQUIRE(rep.exp_params);
        REQUIRE(rep.series);
        CHECK(rep.exp_params->identity_error() <= 1e-12);
        CHECK(rep.series->converged);
    }
    SUBCASE("entropy regime reports entropy checks") {
        const auto r = pde::picard_solve(coeff, radial(1.15), 12, {});
        const std::vector<GridSolution> sols{{r.u, r.f}};
        const auto rep = regime_verdict(sols, exponent_table(3, 1.15, 0.5), coeff, AnalysisOptions{});
        CHECK(rep.grids.front().entropy.size() == 20);
        CHECK(rep.grids.front().weak_norm);
        CHECK(rep.passed());
    }
}

#include "stampacchia/regularity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "stampacchia/errors.hpp"

namespace stampacchia::regularity {

namespace {

std::vector<double> sorted_abs(const pde::GridField& u) {
    std::vector<double> a(u.values().begin(), u.values().end());
    for (double& v : a) v = std::abs(v);
    std::sort(a.begin(), a.end());
    return a;
}

// Number of entries strictly above `level` in an ascending array.
std::size_t count_above(const std::vector<double>& sorted, double level) {
    return static_cast<std::size_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), level));
}

double ratio_spread(double a, double b) {
    if (a == 0.0 && b == 0.0) return 1.0;
    if (a <= 0.0 || b <= 0.0) return std::numeric_limits<double>::infinity();
    return std::max(a, b) / std::min(a, b);
}

}  // namespace

DistributionFunction distribution_function(const pde::GridField& u, std::span<const double> levels) {
    for (std::size_t j = 0; j < levels.size(); ++j) {
        if (!(levels[j] > 0.0) || (j > 0 && !(levels[j] > levels[j - 1])))
            throw DomainError("levels must be positive and strictly ascending");
    }
    const auto a = sorted_abs(u);
    DistributionFunction d;
    d.levels.assign(levels.begin(), levels.end());
    d.measures.reserve(levels.size());
    const double vol = u.cell_volume();
    for (double k : levels) d.measures.push_back(static_cast<double>(count_above(a, k)) * vol);
    return d;
}

std::vector<double> default_levels(const pde::GridField& u, std::size_t count, double low_fraction) {
    if (count < 2) throw DomainError("level count must be at least 2");
    if (!(low_fraction > 0.0 && low_fraction < 1.0)) throw DomainError("low_fraction must lie in (0, 1)");
    const double sup = u.max_abs();
    if (!(sup > 0.0)) return {};
    if (!std::isfinite(sup)) throw DomainError("field is not finite");
    std::vector<double> levels(count);
    const double lo = std::log(low_fraction * sup);
    const double step = (std::log(sup) - lo) / static_cast<double>(count - 1);
    for (std::size_t j = 0; j < count; ++j) levels[j] = std::exp(lo + step * static_cast<double>(j));
    levels.back() = sup;
    return levels;
}

double weak_norm_estimate(const DistributionFunction& d, double p) {
    if (!(p > 0.0)) throw DomainError("weak norm exponent must be positive");
    double best = 0.0;
    for (std::size_t j = 0; j < d.levels.size(); ++j)
        best = std::max(best, std::pow(d.levels[j], p) * d.measures[j]);
    return best;
}

PowerFit fit_power_exponent(const DistributionFunction& d, double k_min, double k_max) {
    std::vector<double> x, y;
    for (std::size_t j = 0; j < d.levels.size(); ++j) {
        const double k = d.levels[j];
        if (k >= k_min && k <= k_max && d.measures[j] > 0.0 && k > 0.0) {
            x.push_back(std::log(k));
            y.push_back(std::log(d.measures[j]));
        }
    }
    if (x.size() < 5)
        throw FitError("power fit needs at least 5 positive points, got " + std::to_string(x.size()));
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw FitError("power fit needs distinct levels");
    PowerFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.points = x.size();
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return fit;
}

std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::bounded: return "bounded";
        case Regime::exponential: return "exponential";
        case Regime::weak_power: return "weak_power";
        case Regime::entropy_weak_power: return "entropy_weak_power";
    }
    return "unknown";
}

ExponentTable exponent_table(int n, double m, double theta) {
    if (n <= 2) throw DomainError("dimension must exceed 2");
    if (!(m > 1.0) || !std::isfinite(m)) throw DomainError("source exponent m must exceed 1");
    if (!(theta >= 0.0 && theta < 1.0)) throw DomainError("theta must lie in [0, 1)");
    ExponentTable x;
    x.n = n;
    x.m = m;
    x.theta = theta;
    const double nd = n;
    x.two_star = 2.0 * nd / (nd - 2.0);
    x.two_star_prime = 2.0 * nd / (nd + 2.0);
    x.m_prime = m / (m - 1.0);
    const double half = nd / 2.0;
    if (m > half) {
        x.regime = Regime::bounded;
    } else if (m == half) {
        x.regime = Regime::exponential;
    } else {
        x.m_double_star = nd * m / (nd - 2.0 * m);
        x.predicted_exponent = *x.m_double_star * (1.0 - theta);
        x.regime = m > x.two_star_prime ? Regime::weak_power : Regime::entropy_weak_power;
    }
    x.recursion_alpha = x.two_star / 2.0;
    x.recursion_beta = x.two_star / (2.0 * x.m_prime);
    x.recursion_theta = theta;
    return x;
}

double levelset_recursion_fit(const DistributionFunction& d, const ExponentTable& x, double min_ratio,
                              double k_floor) {
    const double a = x.recursion_alpha;
    const double b = x.recursion_beta;
    const double ta = x.recursion_theta * a;
    bool any = false;
    double best = 0.0;
    for (std::size_t i = 0; i < d.levels.size(); ++i) {
        const double k = d.levels[i];
        if (k < k_floor) continue;
        for (std::size_t j = i + 1; j < d.levels.size(); ++j) {
            const double h = d.levels[j];
            if (h < min_ratio * k) continue;
            any = true;
            if (d.measures[i] <= 0.0) continue;
            const double v = d.measures[j] * std::pow(h - k, a) / (std::pow(h, ta) * std::pow(d.measures[i], b));
            best = std::max(best, v);
        }
    }
    if (!any) throw FitError("no admissible level pairs for the recursion fit");
    return best;
}

namespace {

// Visits every face once as face(P, N, axis, i, j, k), where (i, j, k) is
// the face index along `axis` and N is kNone for boundary faces.
template <typename Face>
void for_each_face(int n, Face&& face) {
    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    const auto idx = [n](int i, int j, int k) {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(n) * (j + static_cast<std::size_t>(n) * k);
    };
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const std::size_t p = idx(i, j, k);
                face(p, i + 1 < n ? idx(i + 1, j, k) : none, 0, i + 1, j, k);
                face(p, j + 1 < n ? idx(i, j + 1, k) : none, 1, i, j + 1, k);
                face(p, k + 1 < n ? idx(i, j, k + 1) : none, 2, i, j, k + 1);
                if (i == 0) face(p, none, 0, 0, j, k);
                if (j == 0) face(p, none, 1, i, 0, k);
                if (k == 0) face(p, none, 2, i, j, 0);
            }
}

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

void check_pair(const pde::GridField& u, const pde::GridField& f, double k, double h) {
    if (u.n() != f.n()) throw InputError("solution and source grids differ");
    if (!(k > 0.0 && h > k)) throw DomainError("energy check needs 0 < k < h");
}

double test_function(double v, double k, double h) {
    return pde::truncate(pde::excess(v, k), h - k);
}

double rhs_integral(const pde::GridField& u, const pde::GridField& f, double k, double h) {
    double rhs = 0.0;
    for (std::size_t p = 0; p < u.size(); ++p) {
        if (std::abs(u[p]) > k) rhs += f[p] * test_function(u[p], k, h);
    }
    return rhs * u.cell_volume();
}

}  // namespace

EnergyCheck energy_inequality_check(const pde::GridField& u, const pde::GridField& f,
                                    const pde::CoefficientSpec& coeff, double k, double h,
                                    pde::FaceAverage average) {
    check_pair(u, f, k, h);
    const double dx = u.spacing();
    const auto in_band = [&](double v) { return std::abs(v) > k && std::abs(v) <= h; };
    double lhs = 0.0;
    // Boundary faces would pair a cell with the ghost value 0, which never
    // lies in the band, so only interior faces contribute.
    for_each_face(u.n(), [&](std::size_t p, std::size_t q, int, int, int, int) {
        if (q == kNone) return;
        if (!in_band(u[p]) || !in_band(u[q])) return;
        const double a = pde::face_mean(coeff.envelope(u[p]), coeff.envelope(u[q]), average);
        const double du = u[p] - u[q];
        lhs += a * du * du;
    });
    // a (du/dx)^2 over a face-centred control volume dx^3 gives a du^2 dx.
    lhs *= dx;
    EnergyCheck c;
    c.k = k;
    c.h = h;
    c.lhs = lhs;
    c.rhs = rhs_integral(u, f, k, h);
    c.residual = c.rhs - c.lhs;
    return c;
}

EnergyCheck entropy_inequality_check(const pde::GridField& u, const pde::GridField& f,
                                     const pde::CoefficientSpec& coeff, double k, double h,
                                     pde::FaceAverage average) {
    check_pair(u, f, k, h);
    const double dx = u.spacing();
    const auto faces = pde::face_coefficients(coeff, u, average);
    const auto face_value = [&](int axis, int i, int j, int kk) {
        switch (axis) {
            case 0: return faces.x[faces.x_index(i, j, kk)];
            case 1: return faces.y[faces.y_index(i, j, kk)];
            default: return faces.z[faces.z_index(i, j, kk)];
        }
    };
    double lhs = 0.0;
    for_each_face(u.n(), [&](std::size_t p, std::size_t q, int axis, int i, int j, int kk) {
        const double a = face_value(axis, i, j, kk);
        if (q == kNone) {
            // Half-cell distance to the wall doubles the difference quotient.
            lhs += 2.0 * a * u[p] * test_function(u[p], k, h);
        } else {
            lhs += a * (u[p] - u[q]) * (test_function(u[p], k, h) - test_function(u[q], k, h));
        }
    });
    lhs *= dx;
    EnergyCheck c;
    c.k = k;
    c.h = h;
    c.lhs = lhs;
    c.rhs = rhs_integral(u, f, k, h);
    c.residual = c.rhs - c.lhs;
    return c;
}

std::vector<std::pair<double, double>> sample_level_pairs(double sup_u, std::size_t count,
                                                          std::uint64_t seed) {
    std::vector<std::pair<double, double>> pairs;
    if (!(sup_u > 0.0)) return pairs;
    std::mt19937_64 rng(seed);
    // Drawn by hand from raw 53-bit integers so the sequence does not depend
    // on the standard library's distribution implementation.
    const auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    pairs.reserve(count);
    while (pairs.size() < count) {
        const double k = unit() * sup_u;
        if (!(k > 0.0) || !(k < sup_u)) continue;
        const double h = k + (1.0 - unit()) * (sup_u - k);
        if (!(h > k)) continue;
        pairs.emplace_back(k, h);
    }
    return pairs;
}

double ExpIntegrabilityParams::identity_error() const {
    return std::abs(std::exp2(2.0 - theta) * lambda * std::pow(tau, 1.0 - theta) - 1.0);
}

ExpIntegrabilityParams exp_integrability_params(double tau, double theta) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("tau must be positive and finite");
    if (!(theta >= 0.0 && theta < 1.0)) throw DomainError("theta must lie in [0, 1)");
    return {tau, std::pow(tau, theta - 1.0) / std::exp2(2.0 - theta), theta};
}

SeriesCheck series_integrability_check(const DistributionFunction& d_g, double r) {
    if (!(r >= 1.0)) throw DomainError("series exponent r must be at least 1");
    SeriesCheck s;
    double last = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d_g.levels.size(); ++j) {
        const double k = d_g.levels[j];
        const double weight = (k == 0.0 && r == 1.0) ? 1.0 : std::pow(k, r - 1.0);
        last = weight * d_g.measures[j];
        s.sum += last;
        ++s.terms;
        if (d_g.measures[j] == 0.0) {
            s.converged = true;
            return s;
        }
    }
    s.converged = last < 1e-12;
    return s;
}

DistributionFunction exp_distribution(const pde::GridField& u, const ExpIntegrabilityParams& e) {
    const auto a = sorted_abs(u);
    std::vector<double> g(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) g[i] = std::exp(e.lambda * std::pow(a[i], 1.0 - e.theta));
    const double gmax = g.empty() ? 0.0 : g.back();
    if (!std::isfinite(gmax)) throw DomainError("exp transform overflowed");
    const auto top = static_cast<std::size_t>(std::ceil(gmax));
    DistributionFunction d;
    const double vol = u.cell_volume();
    for (std::size_t k = 0; k <= top; ++k) {
        d.levels.push_back(static_cast<double>(k));
        d.measures.push_back(static_cast<double>(count_above(g, static_cast<double>(k))) * vol);
    }
    return d;
}

bool RegularityReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const NamedCheck& c) { return c.passed; });
}

RegularityReport regime_verdict(std::span<const GridSolution> solutions, const ExponentTable& x,
                                const pde::CoefficientSpec& coeff, const AnalysisOptions& opt,
                                pde::FaceAverage average) {
    if (solutions.empty()) throw InputError("regime verdict needs at least one solution");
    RegularityReport rep;
    rep.table = x;
    const bool entropy = x.regime == Regime::entropy_weak_power;

    double worst_energy = std::numeric_limits<double>::infinity();
    for (const auto& s : solutions) {
        if (s.u.n() != s.f.n()) throw InputError("solution and source grids differ");
        GridAnalysis g;
        g.n = s.u.n();
        g.sup_u = s.u.max_abs();
        if (!std::isfinite(g.sup_u)) throw DomainError("solution is not finite");
        const auto levels = default_levels(s.u, opt.level_count, opt.low_fraction);
        g.distribution = distribution_function(s.u, levels);
        if (x.predicted_exponent) g.weak_norm = weak_norm_estimate(g.distribution, *x.predicted_exponent);
        try {
            g.recursion_constant = levelset_recursion_fit(g.distribution, x, opt.pair_ratio, opt.k_floor);
        } catch (const FitError&) {
        }
        if (g.sup_u > 0.0) {
            try {
                g.fit = fit_power_exponent(g.distribution, 0.1 * g.sup_u, g.sup_u);
            } catch (const FitError&) {
            }
        }
        for (const auto& [k, h] : sample_level_pairs(g.sup_u, opt.energy_pairs, opt.seed)) {
            auto e = energy_inequality_check(s.u, s.f, coeff, k, h, average);
            worst_energy = std::min(worst_energy, e.residual + opt.energy_slack * std::abs(e.rhs));
            g.energy.push_back(e);
            if (entropy) g.entropy.push_back(entropy_inequality_check(s.u, s.f, coeff, k, h, average));
        }
        rep.grids.push_back(std::move(g));
    }

    rep.checks.push_back({"energy_inequality", std::isfinite(worst_energy) ? worst_energy : 0.0, 0.0,
                          !std::isfinite(worst_energy) || worst_energy >= 0.0});
    if (entropy) {
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& g : rep.grids)
            for (const auto& e : g.entropy) worst = std::min(worst, e.residual + opt.energy_slack * std::abs(e.rhs));
        rep.checks.push_back({"entropy_inequality", std::isfinite(worst) ? worst : 0.0, 0.0,
                              !std::isfinite(worst) || worst >= 0.0});
    }

    const auto& fine = rep.grids.back();
    const GridAnalysis* coarse = rep.grids.size() >= 2 ? &rep.grids[rep.grids.size() - 2] : nullptr;

    // Lemma constants from the fitted recursion; k0 = 1 as in the proof.
    const double c_fit = fine.recursion_constant.value_or(0.0);
    lemma::LemmaParams lp;
    lp.c = c_fit > 0.0 ? c_fit : std::numeric_limits<double>::min();
    lp.alpha = x.recursion_alpha;
    lp.beta = x.recursion_beta;
    lp.theta = x.theta;
    lp.k0 = 1.0;
    {
        const auto one = distribution_function(solutions.back().u, std::array<double, 1>{1.0});
        lp.phi0 = one.measures[0];
    }

    switch (x.regime) {
        case Regime::bounded: {
            rep.checks.push_back({"sup_finite", fine.sup_u, std::numeric_limits<double>::max(),
                                  std::isfinite(fine.sup_u)});
            if (coarse) {
                const double top = std::max(fine.sup_u, coarse->sup_u);
                const double rel = top > 0.0 ? std::abs(fine.sup_u - coarse->sup_u) / top : 0.0;
                rep.checks.push_back({"sup_stability", rel, opt.sup_stability, rel < opt.sup_stability});
            }
            rep.lemma_params = lp;
            rep.lemma_bound = lemma::generalized_bound(lp);
            break;
        }
        case Regime::exponential: {
            lp.beta = 1.0;
            rep.lemma_params = lp;
            rep.lemma_bound = lemma::generalized_bound(lp);
            const double tau = lemma::compute_tau(lp);
            rep.exp_params = exp_integrability_params(tau, x.theta);
            rep.checks.push_back({"lambda_identity", rep.exp_params->identity_error(), 1e-12,
                                  rep.exp_params->identity_error() <= 1e-12});
            rep.series = series_integrability_check(exp_distribution(solutions.back().u, *rep.exp_params), 1.0);
            rep.checks.push_back({"series_converged", rep.series->sum, std::numeric_limits<double>::max(),
                                  rep.series->converged && std::isfinite(rep.series->sum)});
            break;
        }
        case Regime::weak_power:
        case Regime::entropy_weak_power: {
            rep.lemma_params = lp;
            rep.lemma_bound = lemma::generalized_bound(lp);
            const double w = fine.weak_norm.value_or(0.0);
            rep.checks.push_back({"weak_norm_finite", w, std::numeric_limits<double>::max(), std::isfinite(w)});
            if (coarse) {
                const double spread = ratio_spread(coarse->weak_norm.value_or(0.0), w);
                rep.checks.push_back({"weak_norm_stability", spread, opt.stability_factor,
                                      spread <= opt.stability_factor});
                if (coarse->recursion_constant || fine.recursion_constant) {
                    const double rs = ratio_spread(coarse->recursion_constant.value_or(0.0), c_fit);
                    rep.checks.push_back({"recursion_constant_stability", rs, opt.stability_factor,
                                          rs <= opt.stability_factor});
                }
            }
            break;
        }
    }
    return rep;
}

}  // namespace stampacchia::regularity

#include "stampacchia/lemma_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "stampacchia/errors.hpp"

namespace stampacchia::lemma {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMax = std::numeric_limits<double>::max();

// Clamps non-finite or out-of-range constants to the largest double and
// remembers that it happened.
struct Saturator {
    bool overflow = false;

    double operator()(double x) {
        if (std::isnan(x) || x > kMax) {
            overflow = true;
            return kMax;
        }
        return x;
    }
};

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

void require(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

bool finite(double x) { return std::isfinite(x); }

}  // namespace

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::classical: return "classical";
        case Variant::kv: return "kv";
        case Variant::generalized: return "generalized";
    }
    return "unknown";
}

Variant variant_from_string(std::string_view name) {
    if (name == "classical") return Variant::classical;
    if (name == "kv") return Variant::kv;
    if (name == "generalized") return Variant::generalized;
    throw InputError("unknown lemma variant '" + std::string(name) + "'");
}

std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::vanishing: return "vanishing";
        case Regime::exponential: return "exponential";
        case Regime::power_law: return "power_law";
    }
    return "unknown";
}

Regime regime_of(double beta) {
    if (beta > 1.0) return Regime::vanishing;
    if (beta == 1.0) return Regime::exponential;
    return Regime::power_law;
}

void validate(const LemmaParams& p, Variant v) {
    require(finite(p.c) && p.c > 0.0, "c must be positive, got " + fmt(p.c));
    require(finite(p.alpha) && p.alpha > 0.0, "alpha must be positive, got " + fmt(p.alpha));
    require(finite(p.beta) && p.beta > 0.0, "beta must be positive, got " + fmt(p.beta));
    require(finite(p.phi0) && p.phi0 >= 0.0, "phi0 must be nonnegative, got " + fmt(p.phi0));
    require(finite(p.k0), "k0 must be finite");
    if (v == Variant::classical) {
        if (p.beta < 1.0) require(p.k0 > 0.0, "k0 must be positive when beta < 1, got " + fmt(p.k0));
        return;
    }
    require(finite(p.theta) && p.theta >= 0.0 && p.theta < 1.0,
            "theta must lie in [0, 1), got " + fmt(p.theta));
    require(p.k0 > 0.0, "k0 must be positive, got " + fmt(p.k0));
}

Regime DecayBound::regime() const {
    if (std::holds_alternative<VanishingLevel>(shape)) return Regime::vanishing;
    if (std::holds_alternative<ExponentialDecay>(shape)) return Regime::exponential;
    return Regime::power_law;
}

double DecayBound::evaluate(double k) const {
    if (const auto* v = std::get_if<VanishingLevel>(&shape)) {
        return k >= v->level ? 0.0 : kInf;
    }
    if (const auto* e = std::get_if<ExponentialDecay>(&shape)) {
        const double t = std::max(k - e->base_level, 0.0) / e->tau;
        return e->phi0 * std::exp(1.0 - std::pow(t, 1.0 - e->theta));
    }
    const auto& pl = std::get<PowerLawDecay>(shape);
    return pl.coefficient * std::pow(k, -pl.exponent);
}

// -- closed-form constants -------------------------------------------------

namespace {

double compute_L_impl(const LemmaParams& p, Saturator& sat) {
    const double a = (1.0 - p.theta) * p.alpha;
    const double b = p.beta;
    if (p.phi0 == 0.0) return 2.0 * p.k0;
    const double log_term = std::log(p.c) / a + (b - 1.0) / a * std::log(p.phi0) +
                            std::numbers::ln2 * (b + p.theta + 1.0 / (b - 1.0)) / ((1.0 - p.theta) * b);
    const double second = sat(std::exp(log_term));
    return std::max(2.0 * p.k0, second);
}

double compute_tau_impl(const LemmaParams& p, Saturator& sat) {
    const double a = (1.0 - p.theta) * p.alpha;
    const double inner = p.c * std::numbers::e *
                         std::exp2((2.0 - p.theta) * p.theta * p.alpha / (1.0 - p.theta)) *
                         std::pow(1.0 - p.theta, p.alpha);
    return std::max(p.k0, sat(std::pow(inner, 1.0 / a)));
}

DoublingConstants doubling_impl(double c3, double at, double beta, double k0, double phi0,
                                Saturator& sat) {
    const double q = 1.0 - beta;
    const double c5 = sat(std::exp2(at / (q * q)) *
                          (std::pow(c3, 1.0 / q) + std::pow(2.0 * k0, at / q) * phi0));
    const double c4 = sat(std::max(std::pow(4.0, at) * c3, std::pow(c5, q)));
    return {c4, c5};
}

void require_regime(const LemmaParams& p, Regime want, const char* op) {
    if (regime_of(p.beta) != want) {
        throw RegimeError(std::string(op) + " requires the " + std::string(to_string(want)) +
                          " regime, got beta = " + fmt(p.beta));
    }
}

}  // namespace

double compute_L(const LemmaParams& p) {
    validate(p, Variant::generalized);
    require_regime(p, Regime::vanishing, "compute_L");
    Saturator sat;
    return compute_L_impl(p, sat);
}

double compute_tau(const LemmaParams& p) {
    validate(p, Variant::generalized);
    require_regime(p, Regime::exponential, "compute_tau");
    Saturator sat;
    return compute_tau_impl(p, sat);
}

PowerConstants compute_power_constants(const LemmaParams& p) {
    validate(p, Variant::generalized);
    require_regime(p, Regime::power_law, "compute_power_constants");
    Saturator sat;
    const auto dc = doubling_impl(p.c * std::exp2(p.theta * p.alpha), (1.0 - p.theta) * p.alpha,
                                  p.beta, p.k0, p.phi0, sat);
    return {dc.c4, dc.c5};
}

DoublingConstants doubling_transfer(double c3, double alpha_tilde, double beta, double k0,
                                    double phi0) {
    require(finite(c3) && c3 > 0.0, "c3 must be positive");
    require(finite(alpha_tilde) && alpha_tilde > 0.0, "alpha_tilde must be positive");
    require(finite(k0) && k0 > 0.0, "k0 must be positive");
    require(finite(phi0) && phi0 >= 0.0, "phi0 must be nonnegative");
    if (!(beta > 0.0 && beta < 1.0)) {
        throw RegimeError("doubling_transfer requires 0 < beta < 1, got beta = " + fmt(beta));
    }
    Saturator sat;
    return doubling_impl(c3, alpha_tilde, beta, k0, phi0, sat);
}

DecayBound classical_bound(const LemmaParams& p) {
    validate(p, Variant::classical);
    Saturator sat;
    DecayBound out{VanishingLevel{0.0}, {}, false};
    switch (regime_of(p.beta)) {
        case Regime::vanishing: {
            // d^alpha = c phi0^(beta-1) 2^(alpha beta / (beta-1))
            double d = 0.0;
            if (p.phi0 > 0.0) {
                d = sat(std::exp((std::log(p.c) + (p.beta - 1.0) * std::log(p.phi0)) / p.alpha +
                                 std::numbers::ln2 * p.beta / (p.beta - 1.0)));
            }
            out.shape = VanishingLevel{sat(p.k0 + d)};
            out.constants.d = d;
            break;
        }
        case Regime::exponential: {
            const double tau = sat(std::pow(p.c * std::numbers::e, 1.0 / p.alpha));
            out.shape = ExponentialDecay{tau, 0.0, p.k0, p.phi0};
            out.constants.tau = tau;
            break;
        }
        case Regime::power_law: {
            const double q = 1.0 - p.beta;
            const double exponent = p.alpha / q;
            const double coef = sat(std::exp2(p.alpha / (q * q)) *
                                    (std::pow(p.c, 1.0 / q) +
                                     std::pow(2.0 * p.k0, exponent) * p.phi0));
            out.shape = PowerLawDecay{coef, exponent};
            break;
        }
    }
    out.overflow = sat.overflow;
    return out;
}

DecayBound kv_bound(const LemmaParams& p) {
    validate(p, Variant::kv);
    Saturator sat;
    DecayBound out{VanishingLevel{0.0}, {}, false};
    const double a = (1.0 - p.theta) * p.alpha;
    switch (regime_of(p.beta)) {
        case Regime::vanishing: {
            // The kv hypothesis implies the generalized one, so 2L applies.
            const double L = compute_L_impl(p, sat);
            out.shape = VanishingLevel{sat(2.0 * L)};
            out.constants.L = L;
            break;
        }
        case Regime::exponential: {
            const double inner = p.c * std::numbers::e * std::exp2(p.theta * p.alpha) *
                                 std::pow(1.0 - p.theta, p.alpha);
            const double tau = std::max(p.k0, sat(std::pow(inner, 1.0 / a)));
            out.shape = ExponentialDecay{tau, p.theta, p.k0, p.phi0};
            out.constants.tau = tau;
            break;
        }
        case Regime::power_law: {
            const double q = 1.0 - p.beta;
            const double exponent = a / q;
            const double coef = sat(std::exp2(a / (q * q)) *
                                    (std::pow(p.c, 1.0 / q) +
                                     std::pow(2.0 * p.k0, exponent) * p.phi0));
            out.shape = PowerLawDecay{coef, exponent};
            break;
        }
    }
    out.overflow = sat.overflow;
    return out;
}

DecayBound generalized_bound(const LemmaParams& p) {
    validate(p, Variant::generalized);
    Saturator sat;
    DecayBound out{VanishingLevel{0.0}, {}, false};
    const double a = (1.0 - p.theta) * p.alpha;
    switch (regime_of(p.beta)) {
        case Regime::vanishing: {
            const double L = compute_L_impl(p, sat);
            out.shape = VanishingLevel{sat(2.0 * L)};
            out.constants.L = L;
            break;
        }
        case Regime::exponential: {
            const double tau = compute_tau_impl(p, sat);
            out.shape = ExponentialDecay{tau, p.theta, p.k0, p.phi0};
            out.constants.tau = tau;
            break;
        }
        case Regime::power_law: {
            const double q = 1.0 - p.beta;
            const double two_ta = std::exp2(p.theta * p.alpha);
            const auto dc = doubling_impl(p.c * two_ta, a, p.beta, p.k0, p.phi0, sat);
            const double exponent = a / q;
            const double coef = sat(std::exp2(a / (q * q)) *
                                    (std::pow(dc.c4 * two_ta, 1.0 / q) +
                                     std::pow(2.0 * p.k0, exponent) * p.phi0));
            out.shape = PowerLawDecay{coef, exponent};
            out.constants.c1 = dc.c4;
            out.constants.c2 = dc.c5;
            break;
        }
    }
    out.overflow = sat.overflow;
    return out;
}

DecayBound bound_for(const LemmaParams& p, Variant v) {
    switch (v) {
        case Variant::classical: return classical_bound(p);
        case Variant::kv: return kv_bound(p);
        case Variant::generalized: return generalized_bound(p);
    }
    throw InputError("unknown variant");
}

// -- iteration lemma -------------------------------------------------------

double IterationResult::envelope(std::size_t i, const IterationParams& q) const {
    return std::pow(q.B, -static_cast<double>(i) / (q.beta - 1.0)) * q.x0;
}

IterationResult iteration_limit(const IterationParams& q, std::size_t n_steps) {
    require(finite(q.C) && q.C > 0.0, "C must be positive");
    require(finite(q.B) && q.B > 1.0, "B must exceed 1");
    require(finite(q.beta) && q.beta > 1.0, "beta must exceed 1");
    require(finite(q.x0) && q.x0 >= 0.0, "x0 must be nonnegative");
    require(n_steps >= 1, "n_steps must be positive");

    IterationResult r;
    r.threshold = std::pow(q.C, -1.0 / (q.beta - 1.0)) *
                  std::pow(q.B, -1.0 / ((q.beta - 1.0) * (q.beta - 1.0)));
    r.converged = q.x0 <= r.threshold;
    r.sequence.reserve(n_steps + 1);
    r.sequence.push_back(q.x0);
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double next =
            q.C * std::pow(q.B, static_cast<double>(i)) * std::pow(r.sequence.back(), q.beta);
        if (!std::isfinite(next)) {
            r.overflow = true;
            r.converged = false;
            break;
        }
        r.sequence.push_back(next);
    }
    return r;
}

// -- extremal oracle -------------------------------------------------------

double LevelFunction::at(double k) const {
    auto it = std::upper_bound(levels.begin(), levels.end(), k);
    if (it == levels.begin()) return values.front();
    return values[static_cast<std::size_t>(it - levels.begin()) - 1];
}

double hypothesis_rhs(const LemmaParams& p, Variant v, double h, double k, double phi_k) {
    if (phi_k == 0.0) return 0.0;
    double weight = 1.0;
    if (v == Variant::kv) weight = std::pow(k, p.theta * p.alpha);
    if (v == Variant::generalized) weight = std::pow(h, p.theta * p.alpha);
    return p.c * weight * std::pow(h - k, -p.alpha) * std::pow(phi_k, p.beta);
}

std::vector<double> geometric_levels(double k0, double k_max, std::size_t count) {
    if (!(k0 > 0.0) || !(k_max > k0) || count < 2) {
        throw InputError("geometric_levels needs 0 < k0 < k_max and count >= 2");
    }
    const double log_ratio = std::log(k_max / k0) / static_cast<double>(count - 1);
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = k0 * std::exp(log_ratio * static_cast<double>(i));
    }
    out.front() = k0;
    out.back() = k_max;
    return out;
}

LevelGrid LevelGrid::from_levels(std::span<const double> levels) {
    LevelGrid g;
    g.levels.assign(levels.begin(), levels.end());
    g.backbone.assign(levels.size(), -1);
    if (levels.size() < 3 || !(levels.front() > 0.0) || !(levels.back() > levels.front())) {
        return g;
    }
    const double log_ratio =
        std::log(levels.back() / levels.front()) / static_cast<double>(levels.size() - 1);
    for (std::size_t i = 1; i < levels.size(); ++i) {
        const double expected = levels.front() * std::exp(log_ratio * static_cast<double>(i));
        if (std::abs(levels[i] - expected) > 1e-12 * expected) return g;
    }
    g.log_ratio = log_ratio;
    for (std::size_t i = 0; i < levels.size(); ++i) g.backbone[i] = static_cast<std::ptrdiff_t>(i);
    return g;
}

namespace {

// Level chains along which the proofs iterate the hypothesis.
std::vector<double> proof_chain(const LemmaParams& p, Variant v, double k_max) {
    constexpr std::size_t kMaxChain = 64;
    std::vector<double> chain;
    const auto bound = bound_for(p, v);
    if (bound.overflow) return chain;
    switch (regime_of(p.beta)) {
        case Regime::vanishing: {
            if (v == Variant::classical) {
                // k0 + d (1 - 2^-i)
                const double d = *bound.constants.d;
                for (std::size_t i = 1; i <= kMaxChain && d > 0.0; ++i) {
                    chain.push_back(p.k0 + d * (1.0 - std::exp2(-static_cast<double>(i))));
                }
            } else {
                // 2L (1 - 2^(-i-1))
                const double L = *bound.constants.L;
                for (std::size_t i = 0; i < kMaxChain; ++i) {
                    chain.push_back(2.0 * L * (1.0 - std::exp2(-static_cast<double>(i) - 1.0)));
                }
            }
            break;
        }
        case Regime::exponential: {
            // k0 + tau s^(1/(1-theta))
            const auto& e = std::get<ExponentialDecay>(bound.shape);
            for (std::size_t s = 1; s <= kMaxChain; ++s) {
                const double k =
                    p.k0 + e.tau * std::pow(static_cast<double>(s), 1.0 / (1.0 - e.theta));
                if (k > k_max) break;
                chain.push_back(k);
            }
            break;
        }
        case Regime::power_law: {
            // doubling levels 2^s k0
            for (std::size_t s = 1; s <= kMaxChain; ++s) {
                const double k = p.k0 * std::exp2(static_cast<double>(s));
                if (k > k_max) break;
                chain.push_back(k);
            }
            break;
        }
    }
    return chain;
}

LevelGrid merge_extras(std::vector<double> backbone_levels, double log_ratio,
                       std::vector<double> extras) {
    std::sort(extras.begin(), extras.end());
    LevelGrid g;
    g.log_ratio = log_ratio;
    g.levels.reserve(backbone_levels.size() + extras.size());
    std::size_t e = 0;
    auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::abs(b); };
    for (std::size_t i = 0; i < backbone_levels.size(); ++i) {
        const double level = backbone_levels[i];
        while (e < extras.size() && extras[e] < level) {
            const double x = extras[e++];
            const bool dup = (!g.levels.empty() && near(x, g.levels.back())) || near(x, level);
            if (!dup && x > backbone_levels.front()) {
                g.levels.push_back(x);
                g.backbone.push_back(-1);
            }
        }
        g.levels.push_back(level);
        g.backbone.push_back(static_cast<std::ptrdiff_t>(i));
    }
    return g;
}

}  // namespace

LevelGrid default_level_grid(const LemmaParams& p, Variant v, std::size_t count) {
    validate(p, v);
    if (count < 4) throw InputError("level grid needs at least 4 levels");
    if (!(p.k0 > 0.0)) throw InputError("default level grid needs k0 > 0");

    std::vector<double> backbone;
    double log_ratio = 0.0;
    if (regime_of(p.beta) == Regime::vanishing) {
        const auto bound = bound_for(p, v);
        const double level = std::get<VanishingLevel>(bound.shape).level;
        if (level > p.k0 && !bound.overflow && std::isfinite(4.0 * level)) {
            // Put the vanishing level exactly on the backbone, keeping the
            // spacing geometric and k_max close to 4 * level.
            const double span_level = std::log(level / p.k0);
            const double span_total = std::log(4.0 * level / p.k0);
            auto j = static_cast<std::size_t>(
                std::lround(static_cast<double>(count - 1) * span_level / span_total));
            j = std::clamp<std::size_t>(j, 1, count - 2);
            log_ratio = span_level / static_cast<double>(j);
            backbone.resize(count);
            for (std::size_t i = 0; i < count; ++i) {
                backbone[i] = p.k0 * std::exp(log_ratio * static_cast<double>(i));
            }
            backbone.front() = p.k0;
            backbone[j] = level;
        }
    }
    if (backbone.empty()) {
        backbone = geometric_levels(p.k0, 1000.0 * p.k0, count);
        log_ratio = std::log(1000.0) / static_cast<double>(count - 1);
    }
    const double k_max = backbone.back();
    auto chain = proof_chain(p, v, k_max);
    return merge_extras(std::move(backbone), log_ratio, std::move(chain));
}

namespace {

void check_grid(const LemmaParams& p, std::span<const double> grid) {
    if (grid.empty()) throw InputError("level grid is empty");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) throw InputError("level grid must be strictly ascending");
    }
    const double tol = 1e-12 * std::max(1.0, std::abs(p.k0));
    if (std::abs(grid.front() - p.k0) > tol) throw InputError("level grid must start at k0");
}

}  // namespace

LevelFunction extremal_level_function_direct(const LemmaParams& p, Variant v,
                                             std::span<const double> level_grid) {
    validate(p, v);
    check_grid(p, level_grid);
    const std::size_t n = level_grid.size();
    LevelFunction out{{level_grid.begin(), level_grid.end()}, std::vector<double>(n, 0.0)};
    out.values[0] = p.phi0;
    for (std::size_t j = 1; j < n; ++j) {
        double best = out.values[j - 1];
        for (std::size_t i = 0; i < j; ++i) {
            best = std::min(best, hypothesis_rhs(p, v, level_grid[j], level_grid[i], out.values[i]));
        }
        out.values[j] = best;
    }
    return out;
}

LevelFunction extremal_level_function(const LemmaParams& p, Variant v,
                                      std::span<const double> level_grid) {
    return extremal_level_function(p, v, LevelGrid::from_levels(level_grid));
}

LevelFunction extremal_level_function(const LemmaParams& p, Variant v, const LevelGrid& grid) {
    validate(p, v);
    check_grid(p, grid.levels);
    if (grid.backbone.size() != grid.levels.size()) {
        throw InputError("level grid backbone map has the wrong length");
    }
    const std::size_t n = grid.size();
    std::size_t nb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (grid.backbone[i] < 0) continue;
        if (grid.backbone[i] != static_cast<std::ptrdiff_t>(nb)) {
            throw InputError("level grid backbone indices must be consecutive from 0");
        }
        ++nb;
    }
    if (nb < 2 || !(grid.log_ratio > 0.0)) {
        return extremal_level_function_direct(p, v, grid.levels);
    }

    // Between backbone levels h - k = k (r^(b_h - b_k) - 1), so
    //   RHS(h, k) = outer(h) * weight(k) * gap(b_h - b_k)
    // with gap(d) = (r^d - 1)^(-alpha). gap is stored reversed so the inner
    // minimisation runs over contiguous memory. Pairs touching an extra
    // level are evaluated directly.
    std::vector<double> gap_rev(nb, 0.0);
    for (std::size_t d = 1; d < nb; ++d) {
        gap_rev[nb - 1 - d] =
            std::pow(std::expm1(static_cast<double>(d) * grid.log_ratio), -p.alpha);
    }
    const double theta_alpha = v == Variant::classical ? 0.0 : p.theta * p.alpha;

    LevelFunction out{grid.levels, std::vector<double>(n, 0.0)};
    std::vector<double> weight(nb, 0.0);
    std::vector<std::size_t> extras;

    auto record = [&](std::size_t pos) {
        const auto b = grid.backbone[pos];
        if (b < 0) {
            extras.push_back(pos);
            return;
        }
        const double phi = out.values[pos];
        double w = 0.0;
        if (phi != 0.0) {
            w = p.c * std::pow(grid.levels[pos], -p.alpha) * std::pow(phi, p.beta);
            if (v == Variant::kv) w *= std::pow(grid.levels[pos], theta_alpha);
        }
        weight[static_cast<std::size_t>(b)] = w;
    };

    out.values[0] = p.phi0;
    record(0);
    for (std::size_t j = 1; j < n; ++j) {
        const double h = grid.levels[j];
        double best = out.values[j - 1];
        const auto bj = grid.backbone[j];
        if (bj >= 0) {
            const auto count = static_cast<std::size_t>(bj);
            const double* g = gap_rev.data() + (nb - 1 - count);
            const double* w = weight.data();
            double m0 = kInf, m1 = kInf, m2 = kInf, m3 = kInf;
            std::size_t i = 0;
            for (; i + 4 <= count; i += 4) {
                m0 = std::min(m0, w[i] * g[i]);
                m1 = std::min(m1, w[i + 1] * g[i + 1]);
                m2 = std::min(m2, w[i + 2] * g[i + 2]);
                m3 = std::min(m3, w[i + 3] * g[i + 3]);
            }
            for (; i < count; ++i) m0 = std::min(m0, w[i] * g[i]);
            double fast = std::min(std::min(m0, m1), std::min(m2, m3));
            if (v == Variant::generalized) fast *= std::pow(h, theta_alpha);
            best = std::min(best, fast);
            for (const std::size_t e : extras) {
                best = std::min(best, hypothesis_rhs(p, v, h, grid.levels[e], out.values[e]));
            }
        } else {
            for (std::size_t i = 0; i < j; ++i) {
                best = std::min(best, hypothesis_rhs(p, v, h, grid.levels[i], out.values[i]));
            }
        }
        out.values[j] = best;
        record(j);
    }
    return out;
}

VerificationReport verify_bound(const LevelFunction& level_fn, const DecayBound& bound) {
    VerificationReport r;
    double worst = -kInf;
    for (std::size_t j = 0; j < level_fn.levels.size(); ++j) {
        const double b = bound.evaluate(level_fn.levels[j]);
        if (std::isinf(b)) continue;
        const double violation = level_fn.values[j] - b;
        ++r.compared;
        if (violation > worst) {
            worst = violation;
            r.worst_level = level_fn.levels[j];
        }
    }
    r.max_violation = r.compared == 0 ? 0.0 : worst;
    return r;
}

}  // namespace stampacchia::lemma

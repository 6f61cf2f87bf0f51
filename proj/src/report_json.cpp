#include "stampacchia/report_json.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <type_traits>

#include "stampacchia/errors.hpp"

namespace stampacchia::report {

namespace {

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

}  // namespace

json to_json(const lemma::LemmaParams& p) {
    return {{"c", p.c}, {"alpha", p.alpha}, {"beta", p.beta}, {"theta", p.theta}, {"k0", p.k0}, {"phi0", p.phi0}};
}

json to_json(const lemma::BoundConstants& c) {
    json j = json::object();
    put_optional(j, "L", c.L);
    put_optional(j, "tau", c.tau);
    put_optional(j, "c1", c.c1);
    put_optional(j, "c2", c.c2);
    put_optional(j, "c4", c.c4);
    put_optional(j, "c5", c.c5);
    put_optional(j, "d", c.d);
    return j;
}

json to_json(const lemma::DecayBound& b) {
    json j;
    j["regime"] = std::string(lemma::to_string(b.regime()));
    std::visit(
        [&j](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, lemma::VanishingLevel>) {
                j["kind"] = "vanishing_level";
                j["level"] = s.level;
            } else if constexpr (std::is_same_v<S, lemma::ExponentialDecay>) {
                j["kind"] = "exponential_decay";
                j["tau"] = s.tau;
                j["theta"] = s.theta;
                j["base_level"] = s.base_level;
                j["phi0"] = s.phi0;
            } else {
                j["kind"] = "power_law_decay";
                j["coefficient"] = s.coefficient;
                j["exponent"] = s.exponent;
            }
        },
        b.shape);
    j["overflow"] = b.overflow;
    return j;
}

json to_json(const lemma::VerificationReport& v) {
    return {{"max_violation", v.max_violation}, {"worst_level", v.worst_level}, {"compared", v.compared}};
}

json lemma_report(const lemma::LemmaParams& p, lemma::Variant v, const lemma::DecayBound& bound,
                  const std::optional<lemma::VerificationReport>& verification) {
    json j;
    j["params"] = to_json(p);
    j["variant"] = std::string(lemma::to_string(v));
    j["bound"] = to_json(bound);
    j["constants"] = to_json(bound.constants);
    j["verification"] = verification ? to_json(*verification) : json(nullptr);
    return j;
}

json to_json(const pde::CoefficientSpec& c) {
    json j;
    j["alpha"] = c.alpha_low;
    j["beta"] = c.beta_high;
    j["theta"] = c.theta;
    j["form"] = c.form == pde::CoefficientForm::table ? "table" : "lower_envelope";
    if (c.form == pde::CoefficientForm::table) {
        json t = json::array();
        for (const auto& [s, a] : c.table) t.push_back({s, a});
        j["table"] = t;
    }
    return j;
}

json to_json(const pde::SolverConfig& c) {
    return {{"picard_tol", c.picard_tol},
            {"picard_max_iters", c.picard_max_iters},
            {"cg_tol", c.cg_tol},
            {"cg_max_iters", c.cg_max_iters},
            {"face_average", std::string(pde::to_string(c.face_average))},
            {"damping", c.damping}};
}

json to_json(const pde::PicardResult& r) {
    return {{"n", r.u.n()},
            {"iterations", r.iterations},
            {"history", r.history},
            {"cg_iterations", r.cg_iterations},
            {"sup_u", r.u.max_abs()}};
}

json to_json(const regularity::DistributionFunction& d) {
    return {{"levels", d.levels}, {"measures", d.measures}};
}

json to_json(const regularity::ExponentTable& x) {
    json j;
    j["n"] = x.n;
    j["m"] = x.m;
    j["theta"] = x.theta;
    j["two_star"] = x.two_star;
    j["two_star_prime"] = x.two_star_prime;
    j["m_prime"] = x.m_prime;
    j["m_double_star"] = x.m_double_star ? json(*x.m_double_star) : json(nullptr);
    j["predicted_exponent"] = x.predicted_exponent ? json(*x.predicted_exponent) : json(nullptr);
    j["regime"] = std::string(regularity::to_string(x.regime));
    j["recursion_alpha"] = x.recursion_alpha;
    j["recursion_beta"] = x.recursion_beta;
    j["recursion_theta"] = x.recursion_theta;
    return j;
}

json to_json(const regularity::EnergyCheck& e) {
    return {{"k", e.k}, {"h", e.h}, {"lhs", e.lhs}, {"rhs", e.rhs}, {"residual", e.residual}};
}

json to_json(const regularity::RegularityReport& r) {
    json grids = json::array();
    for (const auto& g : r.grids) {
        json gj;
        gj["n"] = g.n;
        gj["sup_u"] = g.sup_u;
        gj["distribution_function"] = to_json(g.distribution);
        gj["weak_norm"] = g.weak_norm ? json(*g.weak_norm) : json(nullptr);
        if (g.fit) {
            gj["fit"] = {{"slope", g.fit->slope},
                         {"intercept", g.fit->intercept},
                         {"r_squared", g.fit->r_squared},
                         {"points", g.fit->points}};
        } else {
            gj["fit"] = nullptr;
        }
        gj["recursion_constant"] = g.recursion_constant ? json(*g.recursion_constant) : json(nullptr);
        json e = json::array();
        for (const auto& c : g.energy) e.push_back(to_json(c));
        gj["energy_checks"] = e;
        if (!g.entropy.empty()) {
            json s = json::array();
            for (const auto& c : g.entropy) s.push_back(to_json(c));
            gj["entropy_checks"] = s;
        }
        grids.push_back(gj);
    }
    json checks = json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"passed", c.passed}});

    json j;
    j["grids"] = grids;
    j["checks"] = checks;
    j["passed"] = r.passed();
    json fitted = json::object();
    if (r.lemma_params) fitted["lemma_params"] = to_json(*r.lemma_params);
    if (r.lemma_bound) {
        fitted["lemma_bound"] = to_json(*r.lemma_bound);
        fitted["lemma_constants"] = to_json(r.lemma_bound->constants);
    }
    if (r.exp_params) {
        fitted["exp_integrability"] = {{"tau", r.exp_params->tau},
                                       {"lambda", r.exp_params->lambda},
                                       {"theta", r.exp_params->theta},
                                       {"identity_error", r.exp_params->identity_error()}};
    }
    if (r.series) {
        fitted["series"] = {{"sum", r.series->sum}, {"converged", r.series->converged}, {"terms", r.series->terms}};
    }
    j["fitted_constants"] = fitted;
    return j;
}

json regularity_report(const regularity::RegularityReport& r, const json& config) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["config"] = config;
    j["exponent_table"] = to_json(r.table);
    j["verdicts"] = to_json(r);
    return j;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_distribution_csv(const regularity::DistributionFunction& d, std::ostream& os) {
    os << "level,measure\n";
    for (std::size_t j = 0; j < d.levels.size(); ++j)
        os << format_number(d.levels[j]) << ',' << format_number(d.measures[j]) << '\n';
}

bool all_finite(const json& j) {
    if (j.is_number_float()) return std::isfinite(j.get<double>());
    if (j.is_array() || j.is_object()) {
        for (const auto& v : j) {
            if (!all_finite(v)) return false;
        }
    }
    return true;
}

void write_json(const json& j, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open " + path.string() + " for writing");
    os << j.dump(2) << '\n';
    if (!os) throw Error("failed writing " + path.string());
}

}  // namespace stampacchia::report

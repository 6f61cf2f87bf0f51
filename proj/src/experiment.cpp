#include "stampacchia/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "stampacchia/errors.hpp"
#include "stampacchia/report_json.hpp"

namespace stampacchia::experiment {

using nlohmann::json;

// -- randomized lemma suite ------------------------------------------------

lemma::LemmaParams random_lemma_params(lemma::Regime regime, std::mt19937_64& rng) {
    const auto in = [&rng](double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); };
    lemma::LemmaParams p;
    p.c = in(0.1, 10.0);
    p.alpha = in(0.5, 4.0);
    p.theta = in(0.0, 0.9);
    p.k0 = in(0.5, 5.0);
    p.phi0 = in(0.0, 10.0);
    switch (regime) {
        case lemma::Regime::vanishing: p.beta = in(1.1, 3.0); break;
        case lemma::Regime::exponential: p.beta = 1.0; break;
        case lemma::Regime::power_law: p.beta = in(0.1, 0.9); break;
    }
    return p;
}

OracleCase check_oracle(const lemma::LemmaParams& p, lemma::Variant v, std::size_t grid_count) {
    OracleCase oc;
    oc.params = p;
    oc.variant = v;
    const auto bound = lemma::bound_for(p, v);
    const auto grid = lemma::default_level_grid(p, v, grid_count);
    const auto phi = lemma::extremal_level_function(p, v, grid);
    oc.verification = lemma::verify_bound(phi, bound);
    oc.tolerance = 1e-9 * p.phi0 + 1e-12;
    oc.passed = oc.verification.max_violation <= oc.tolerance;
    if (const auto* vl = std::get_if<lemma::VanishingLevel>(&bound.shape)) {
        oc.value_at_vanishing = phi.at(vl->level);
        // With phi0 = 0 the oracle is identically 0 and the strict check
        // degenerates to 0 < 0.
        if (p.phi0 > 0.0 && !(*oc.value_at_vanishing < 1e-10 * p.phi0)) oc.passed = false;
    }
    return oc;
}

std::vector<OracleCase> run_oracle_suite(std::span<const lemma::Variant> variants,
                                         std::span<const lemma::Regime> regimes, std::size_t tuples,
                                         std::uint64_t seed) {
    std::vector<OracleCase> out;
    for (const auto regime : regimes) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(regime));
        std::vector<lemma::LemmaParams> ps;
        ps.reserve(tuples);
        for (std::size_t t = 0; t < tuples; ++t) ps.push_back(random_lemma_params(regime, rng));
        for (const auto v : variants)
            for (const auto& p : ps) out.push_back(check_oracle(p, v));
    }
    return out;
}

std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::lemma_bound: return "lemma-bound";
        case Mode::lemma_verify: return "lemma-verify";
        case Mode::solve: return "solve";
        case Mode::analyze: return "analyze";
        case Mode::sweep: return "sweep";
    }
    return "unknown";
}

// -- strict config reader ----------------------------------------------------

namespace {

class Reader {
  public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw InputError(where("") + "expected an object");
    }

    double number(const std::string& key, double fallback) {
        return opt_number(key).value_or(fallback);
    }

    std::optional<double> opt_number(const std::string& key) {
        const json* v = take(key);
        if (!v) return std::nullopt;
        if (!v->is_number()) fail(key, "expected a number");
        const double d = v->get<double>();
        if (!std::isfinite(d)) fail(key, "must be finite");
        return d;
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_number_integer()) fail(key, "expected an integer");
        if (v->is_number_unsigned() && v->get<std::uint64_t>() > static_cast<std::uint64_t>(
                                                                      std::numeric_limits<std::int64_t>::max()))
            fail(key, "integer out of range");
        return v->get<std::int64_t>();
    }

    std::optional<std::uint64_t> opt_unsigned(const std::string& key) {
        const json* v = take(key);
        if (!v) return std::nullopt;
        if (v->is_number_unsigned()) return v->get<std::uint64_t>();
        if (v->is_number_integer() && v->get<std::int64_t>() >= 0)
            return static_cast<std::uint64_t>(v->get<std::int64_t>());
        fail(key, "expected a nonnegative integer");
    }

    std::optional<std::string> opt_string(const std::string& key) {
        const json* v = take(key);
        if (!v) return std::nullopt;
        if (!v->is_string()) fail(key, "expected a string");
        return v->get<std::string>();
    }

    bool boolean(const std::string& key, bool fallback) {
        const json* v = take(key);
        if (!v) return fallback;
        if (!v->is_boolean()) fail(key, "expected true or false");
        return v->get<bool>();
    }

    std::optional<std::vector<double>> opt_numbers(const std::string& key) {
        const json* v = take(key);
        if (!v) return std::nullopt;
        if (!v->is_array()) fail(key, "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : *v) {
            if (!e.is_number() || !std::isfinite(e.get<double>())) fail(key, "expected finite numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::optional<std::vector<std::string>> opt_strings(const std::string& key) {
        const json* v = take(key);
        if (!v) return std::nullopt;
        if (!v->is_array()) fail(key, "expected an array of strings");
        std::vector<std::string> out;
        for (const auto& e : *v) {
            if (!e.is_string()) fail(key, "expected strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    std::optional<std::vector<int>> opt_grid_sizes(const std::string& key) {
        const json* v = take(key);
        if (!v) return std::nullopt;
        if (!v->is_array() || v->empty()) fail(key, "expected a nonempty array of grid sizes");
        std::vector<int> out;
        for (const auto& e : *v) {
            if (!e.is_number_integer()) fail(key, "grid sizes must be integers");
            const auto n = e.get<std::int64_t>();
            if (n < 2 || n > 512) fail(key, "grid sizes must lie in [2, 512]");
            out.push_back(static_cast<int>(n));
        }
        return out;
    }

    /// Raw access for nested structures; marks the key as used.
    const json* take(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return nullptr;
        return &j_.at(key);
    }

    std::optional<Reader> child(const std::string& key) {
        const json* v = take(key);
        if (!v) return std::nullopt;
        return Reader(*v, field(key));
    }

    /// Rejects every key that was never asked for.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!used_.contains(it.key())) throw InputError(field(it.key()) + ": unknown key");
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw InputError(field(key) + ": " + msg);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  private:
    std::string where(const std::string& key) const {
        const auto f = field(key);
        return f.empty() ? std::string("config: ") : f + ": ";
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

template <typename F>
void domain_checked(const std::string& field, F&& f) {
    try {
        f();
    } catch (const DomainError& e) {
        throw InputError(field + ": " + e.what());
    } catch (const RegimeError& e) {
        throw InputError(field + ": " + e.what());
    }
}

Mode mode_from_string(const std::string& s) {
    for (auto m : {Mode::lemma_bound, Mode::lemma_verify, Mode::solve, Mode::analyze, Mode::sweep}) {
        if (to_string(m) == s) return m;
    }
    throw InputError("mode: unknown mode '" + s + "'");
}

lemma::Regime regime_from_string(const std::string& s, const std::string& field) {
    for (auto r : {lemma::Regime::vanishing, lemma::Regime::exponential, lemma::Regime::power_law}) {
        if (lemma::to_string(r) == s) return r;
    }
    throw InputError(field + ": unknown regime '" + s + "'");
}

std::vector<lemma::Variant> parse_variants(const std::vector<std::string>& names, const std::string& field) {
    std::vector<lemma::Variant> out;
    for (const auto& n : names) {
        try {
            out.push_back(lemma::variant_from_string(n));
        } catch (const InputError& e) {
            throw InputError(field + ": " + e.what());
        }
    }
    if (out.empty()) throw InputError(field + ": needs at least one variant");
    return out;
}

const std::vector<lemma::Variant> kAllVariants{lemma::Variant::classical, lemma::Variant::kv,
                                               lemma::Variant::generalized};

LemmaBlock parse_lemma(Reader r) {
    LemmaBlock b;
    auto& p = b.params;
    p.c = r.number("c", p.c);
    p.alpha = r.number("alpha", p.alpha);
    p.beta = r.number("beta", p.beta);
    p.theta = r.number("theta", p.theta);
    p.k0 = r.number("k0", p.k0);
    p.phi0 = r.number("phi0", p.phi0);
    if (auto v = r.opt_string("variant")) {
        b.variants = parse_variants({*v}, r.field("variant"));
    } else if (auto vs = r.opt_strings("variants")) {
        b.variants = parse_variants(*vs, r.field("variants"));
    } else {
        b.variants = kAllVariants;
    }
    const auto count = r.integer("grid_count", static_cast<std::int64_t>(b.grid_count));
    if (count < 16 || count > 100000) r.fail("grid_count", "must lie in [16, 100000]");
    b.grid_count = static_cast<std::size_t>(count);
    r.finish();
    for (const auto v : b.variants) {
        domain_checked(r.field(std::string(lemma::to_string(v))), [&] { lemma::validate(p, v); });
    }
    return b;
}

SuiteBlock parse_suite(Reader r) {
    SuiteBlock b;
    const auto t = r.integer("tuples", static_cast<std::int64_t>(b.tuples));
    if (t < 1 || t > 100000) r.fail("tuples", "must lie in [1, 100000]");
    b.tuples = static_cast<std::size_t>(t);
    if (auto vs = r.opt_strings("variants")) b.variants = parse_variants(*vs, r.field("variants"));
    if (auto rs = r.opt_strings("regimes")) {
        b.regimes.clear();
        for (const auto& s : *rs) b.regimes.push_back(regime_from_string(s, r.field("regimes")));
        if (b.regimes.empty()) r.fail("regimes", "needs at least one regime");
    }
    r.finish();
    return b;
}

pde::CoefficientSpec parse_coefficient(Reader r) {
    pde::CoefficientSpec c;
    c.alpha_low = r.number("alpha", c.alpha_low);
    c.beta_high = r.number("beta", c.beta_high);
    c.theta = r.number("theta", c.theta);
    const auto form = r.opt_string("form").value_or("lower_envelope");
    if (form == "lower_envelope") {
        c.form = pde::CoefficientForm::lower_envelope;
    } else if (form == "table") {
        c.form = pde::CoefficientForm::table;
    } else {
        r.fail("form", "expected lower_envelope or table");
    }
    if (const json* t = r.take("table")) {
        if (!t->is_array()) r.fail("table", "expected an array of [s, a] pairs");
        for (const auto& e : *t) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                r.fail("table", "expected [s, a] number pairs");
            c.table.emplace_back(e[0].get<double>(), e[1].get<double>());
        }
    }
    r.finish();
    domain_checked("solver.coefficient", [&] { c.validate(); });
    return c;
}

pde::SourceSpec parse_source(Reader r) {
    pde::SourceSpec s;
    const auto kind = r.opt_string("kind").value_or("radial_power");
    if (kind == "radial_power") {
        s.kind = pde::SourceKind::radial_power;
    } else if (kind == "constant") {
        s.kind = pde::SourceKind::constant;
    } else {
        r.fail("kind", "expected radial_power or constant");
    }
    s.m = r.number("m", s.m);
    s.scale = r.number("scale", s.scale);
    s.value = r.number("value", s.value);
    s.cap = r.opt_number("cap");
    s.auto_cap = r.boolean("auto_cap", s.auto_cap);
    if (auto c = r.opt_numbers("center")) {
        if (c->size() != 3) r.fail("center", "expected three coordinates");
        s.center = {(*c)[0], (*c)[1], (*c)[2]};
    }
    r.finish();
    domain_checked("solver.source", [&] { s.validate(); });
    return s;
}

SolverBlock parse_solver(Reader r) {
    SolverBlock b;
    if (auto c = r.child("coefficient")) b.coefficient = parse_coefficient(std::move(*c));
    if (auto s = r.child("source")) b.source = parse_source(std::move(*s));
    if (auto g = r.opt_grid_sizes("grids")) b.grids = *g;
    auto& c = b.config;
    c.picard_tol = r.number("picard_tol", c.picard_tol);
    c.picard_max_iters = static_cast<int>(r.integer("picard_max_iters", c.picard_max_iters));
    c.cg_tol = r.number("cg_tol", c.cg_tol);
    c.cg_max_iters = static_cast<int>(r.integer("cg_max_iters", c.cg_max_iters));
    c.damping = r.number("damping", c.damping);
    if (auto fa = r.opt_string("face_average")) {
        if (*fa == "harmonic") {
            c.face_average = pde::FaceAverage::harmonic;
        } else if (*fa == "arithmetic") {
            c.face_average = pde::FaceAverage::arithmetic;
        } else {
            r.fail("face_average", "expected harmonic or arithmetic");
        }
    }
    r.finish();
    domain_checked("solver", [&] { c.validate(); });
    return b;
}

AnalysisBlock parse_analysis(Reader r) {
    AnalysisBlock b;
    auto& o = b.options;
    const auto lc = r.integer("level_count", static_cast<std::int64_t>(o.level_count));
    if (lc < 2 || lc > 100000) r.fail("level_count", "must lie in [2, 100000]");
    o.level_count = static_cast<std::size_t>(lc);
    o.low_fraction = r.number("low_fraction", o.low_fraction);
    if (!(o.low_fraction > 0.0 && o.low_fraction < 1.0)) r.fail("low_fraction", "must lie in (0, 1)");
    o.pair_ratio = r.number("pair_ratio", o.pair_ratio);
    if (!(o.pair_ratio > 1.0)) r.fail("pair_ratio", "must exceed 1");
    o.k_floor = r.number("k_floor", o.k_floor);
    if (!(o.k_floor > 0.0)) r.fail("k_floor", "must be positive");
    const auto ep = r.integer("energy_pairs", static_cast<std::int64_t>(o.energy_pairs));
    if (ep < 0 || ep > 100000) r.fail("energy_pairs", "must lie in [0, 100000]");
    o.energy_pairs = static_cast<std::size_t>(ep);
    o.energy_slack = r.number("energy_slack", o.energy_slack);
    if (!(o.energy_slack >= 0.0)) r.fail("energy_slack", "must be nonnegative");
    o.sup_stability = r.number("sup_stability", o.sup_stability);
    if (!(o.sup_stability > 0.0)) r.fail("sup_stability", "must be positive");
    o.stability_factor = r.number("stability_factor", o.stability_factor);
    if (!(o.stability_factor >= 1.0)) r.fail("stability_factor", "must be at least 1");
    b.m = r.opt_number("m");
    if (b.m && !(*b.m > 1.0)) r.fail("m", "must exceed 1");
    r.finish();
    return b;
}

SweepBlock parse_sweep(Reader r) {
    SweepBlock b;
    auto m = r.opt_numbers("m");
    auto t = r.opt_numbers("theta");
    if (!m || m->empty()) r.fail("m", "expected a nonempty array");
    if (!t || t->empty()) r.fail("theta", "expected a nonempty array");
    for (double v : *m)
        if (!(v > 1.0)) r.fail("m", "every m must exceed 1");
    for (double v : *t)
        if (!(v >= 0.0 && v < 1.0)) r.fail("theta", "every theta must lie in [0, 1)");
    b.m = *m;
    b.theta = *t;
    if (auto g = r.opt_grid_sizes("grids")) b.grids = *g;
    r.finish();
    return b;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
    Reader r(doc, "");
    ExperimentConfig cfg;
    cfg.raw = doc;
    const auto mode = r.opt_string("mode");
    if (!mode) throw InputError("mode: missing");
    cfg.mode = mode_from_string(*mode);
    if (auto s = r.opt_unsigned("seed")) cfg.seed = *s;
    if (auto out = r.child("output")) {
        if (auto dir = out->opt_string("dir")) cfg.out_dir = *dir;
        out->finish();
    }
    if (auto b = r.child("lemma")) cfg.lemma = parse_lemma(std::move(*b));
    if (auto b = r.child("lemma_suite")) cfg.suite = parse_suite(std::move(*b));
    if (auto b = r.child("solver")) cfg.solver = parse_solver(std::move(*b));
    if (auto b = r.child("analysis")) cfg.analysis = parse_analysis(std::move(*b));
    if (auto b = r.child("sweep")) cfg.sweep = parse_sweep(std::move(*b));
    r.finish();

    switch (cfg.mode) {
        case Mode::lemma_bound:
            if (!cfg.lemma) throw InputError("lemma: block required for mode lemma-bound");
            break;
        case Mode::lemma_verify:
            if (cfg.lemma && cfg.suite) throw InputError("lemma_suite: give either lemma or lemma_suite, not both");
            if (!cfg.lemma && !cfg.suite) cfg.suite = SuiteBlock{};
            break;
        case Mode::solve:
            if (!cfg.solver) throw InputError("solver: block required for mode solve");
            break;
        case Mode::analyze:
            if (!cfg.solver) throw InputError("solver: block required for mode analyze");
            if (!cfg.analysis) cfg.analysis = AnalysisBlock{};
            if (!cfg.analysis->m && cfg.solver->source.kind != pde::SourceKind::radial_power)
                throw InputError("analysis.m: required when the source is not radial_power");
            break;
        case Mode::sweep:
            if (!cfg.solver) throw InputError("solver: block required for mode sweep");
            if (!cfg.sweep) throw InputError("sweep: block required for mode sweep");
            if (cfg.solver->source.kind != pde::SourceKind::radial_power)
                throw InputError("solver.source.kind: sweep needs a radial_power source");
            if (!cfg.analysis) cfg.analysis = AnalysisBlock{};
            if (cfg.sweep->grids.empty()) cfg.sweep->grids = cfg.solver->grids;
            for (double t : cfg.sweep->theta) {
                auto c = cfg.solver->coefficient;
                c.theta = t;
                domain_checked("sweep.theta", [&] { c.validate(); });
            }
            break;
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

// -- running ---------------------------------------------------------------

namespace {

class NonFinite : public Error {
  public:
    using Error::Error;
};

struct Context {
    const ExperimentConfig& cfg;
    std::filesystem::path out;
    std::ostream& log;
    bool quiet;

    void note(const std::string& s) const {
        if (!quiet) log << s << '\n';
    }

    json base() const {
        json j;
        j["schema_version"] = report::kSchemaVersion;
        j["mode"] = std::string(to_string(cfg.mode));
        j["seed"] = cfg.seed;
        j["config"] = cfg.raw;
        return j;
    }

    void write(const json& j, const std::string& name) const {
        if (!report::all_finite(j)) throw NonFinite("non-finite value in " + name);
        report::write_json(j, out / name);
        note("wrote " + (out / name).string());
    }
};

std::string tag(double v) { return report::format_number(v); }

int run_lemma_bound(const Context& ctx) {
    const auto& b = *ctx.cfg.lemma;
    json j = ctx.base();
    json reports = json::array();
    for (const auto v : kAllVariants) {
        try {
            reports.push_back(report::lemma_report(b.params, v, lemma::bound_for(b.params, v)));
        } catch (const DomainError& e) {
            reports.push_back({{"variant", std::string(lemma::to_string(v))}, {"error", e.what()}});
        }
    }
    j["reports"] = reports;
    ctx.write(j, "lemma_bound.json");
    return kExitOk;
}

json oracle_case_json(const OracleCase& c) {
    json j;
    j["params"] = report::to_json(c.params);
    j["variant"] = std::string(lemma::to_string(c.variant));
    j["regime"] = std::string(lemma::to_string(lemma::regime_of(c.params.beta)));
    j["verification"] = report::to_json(c.verification);
    j["tolerance"] = c.tolerance;
    j["value_at_vanishing"] = c.value_at_vanishing ? json(*c.value_at_vanishing) : json(nullptr);
    j["passed"] = c.passed;
    return j;
}

int run_lemma_verify(const Context& ctx) {
    std::vector<OracleCase> cases;
    if (ctx.cfg.lemma) {
        for (const auto v : ctx.cfg.lemma->variants)
            cases.push_back(check_oracle(ctx.cfg.lemma->params, v, ctx.cfg.lemma->grid_count));
    } else {
        const auto& s = *ctx.cfg.suite;
        cases = run_oracle_suite(s.variants, s.regimes, s.tuples, ctx.cfg.seed);
    }
    json j = ctx.base();
    json arr = json::array();
    std::size_t failures = 0;
    double max_violation = 0.0;
    for (const auto& c : cases) {
        arr.push_back(oracle_case_json(c));
        if (!c.passed) ++failures;
        max_violation = std::max(max_violation, c.verification.max_violation);
    }
    j["cases"] = arr;
    j["summary"] = {{"cases", cases.size()}, {"failures", failures}, {"max_violation", max_violation}};
    ctx.write(j, "lemma_verify.json");
    ctx.note("lemma-verify: " + std::to_string(cases.size() - failures) + "/" + std::to_string(cases.size()) +
             " cases passed, max_violation " + tag(max_violation));
    return failures == 0 ? kExitOk : kExitVerificationFailed;
}

struct SolveOutcome {
    std::optional<pde::PicardResult> result;
    std::string status = "converged";
    std::string message;
    std::vector<double> history;
};

SolveOutcome solve_one(const pde::CoefficientSpec& coeff, const pde::SourceSpec& src, int n,
                       const pde::SolverConfig& sc) {
    SolveOutcome o;
    try {
        o.result = pde::picard_solve(coeff, src, n, sc);
        o.history = o.result->history;
        if (!std::isfinite(o.result->u.max_abs())) {
            o.status = "non_finite";
            o.message = "solution is not finite";
            o.result.reset();
        }
    } catch (const ConvergenceError& e) {
        o.status = "not_converged";
        o.message = e.what();
        o.history = e.history();
    }
    return o;
}

json outcome_json(const SolveOutcome& o, int n) {
    json j;
    if (o.result) {
        j = report::to_json(*o.result);
    } else {
        j["n"] = n;
        j["history"] = o.history;
    }
    j["status"] = o.status;
    if (!o.message.empty()) j["message"] = o.message;
    return j;
}

int run_solve(const Context& ctx) {
    const auto& s = *ctx.cfg.solver;
    json j = ctx.base();
    json runs = json::array();
    int code = kExitOk;
    for (int n : s.grids) {
        const auto o = solve_one(s.coefficient, s.source, n, s.config);
        json r = outcome_json(o, n);
        if (o.result) {
            const std::string file = "u_N" + std::to_string(n) + ".bin";
            pde::save_binary(o.result->u, ctx.out / file);
            r["field_file"] = file;
            ctx.note("solve N=" + std::to_string(n) + ": " + std::to_string(o.result->iterations) +
                     " Picard iterations, sup|u| = " + tag(o.result->u.max_abs()));
        } else {
            ctx.note("solve N=" + std::to_string(n) + ": " + o.status);
            code = kExitSolverFailure;
        }
        runs.push_back(r);
    }
    j["runs"] = runs;
    ctx.write(j, "solve.json");
    return code;
}

void write_distributions(const Context& ctx, const regularity::RegularityReport& rep, const std::string& prefix) {
    for (const auto& g : rep.grids) {
        const auto path = ctx.out / (prefix + "distribution_N" + std::to_string(g.n) + ".csv");
        std::ofstream os(path, std::ios::binary);
        if (!os) throw InputError("cannot open " + path.string() + " for writing");
        report::write_distribution_csv(g.distribution, os);
    }
}

int run_analyze(const Context& ctx) {
    const auto& s = *ctx.cfg.solver;
    const auto& a = *ctx.cfg.analysis;
    auto opt = a.options;
    opt.seed = ctx.cfg.seed;
    const double m = a.m.value_or(s.source.m);
    const auto table = regularity::exponent_table(3, m, s.coefficient.theta);

    std::vector<regularity::GridSolution> sols;
    json runs = json::array();
    bool failed = false;
    for (int n : s.grids) {
        const auto o = solve_one(s.coefficient, s.source, n, s.config);
        runs.push_back(outcome_json(o, n));
        if (!o.result) {
            failed = true;
            ctx.note("analyze N=" + std::to_string(n) + ": " + o.status);
            continue;
        }
        sols.push_back({o.result->u, o.result->f});
    }
    if (failed) {
        json j = ctx.base();
        j["runs"] = runs;
        ctx.write(j, "analysis.json");
        return kExitSolverFailure;
    }
    const auto rep = regularity::regime_verdict(sols, table, s.coefficient, opt, s.config.face_average);
    json j = report::regularity_report(rep, ctx.cfg.raw);
    j["mode"] = std::string(to_string(ctx.cfg.mode));
    j["seed"] = ctx.cfg.seed;
    j["runs"] = runs;
    ctx.write(j, "analysis.json");
    write_distributions(ctx, rep, "");
    for (const auto& c : rep.checks)
        ctx.note("check " + c.name + ": " + (c.passed ? "pass" : "fail") + " (value " + tag(c.value) + ")");
    return rep.passed() ? kExitOk : kExitVerificationFailed;
}

int run_sweep(const Context& ctx) {
    const auto& s = *ctx.cfg.solver;
    const auto& sw = *ctx.cfg.sweep;
    auto opt = ctx.cfg.analysis->options;
    opt.seed = ctx.cfg.seed;

    std::ostringstream csv;
    csv << "m,theta,N,regime,status,sup_u,weak_norm,fitted_exponent,predicted_exponent,report\n";
    bool any_solver_failure = false;
    bool any_check_failure = false;
    for (double m : sw.m)
        for (double theta : sw.theta)
            for (int n : sw.grids) {
                auto coeff = s.coefficient;
                coeff.theta = theta;
                auto src = s.source;
                src.m = m;
                const auto table = regularity::exponent_table(3, m, theta);
                const std::string prefix = "sweep_m" + tag(m) + "_theta" + tag(theta) + "_N" + std::to_string(n);
                const auto o = solve_one(coeff, src, n, s.config);
                std::string status = o.status;
                std::string sup, wn, fitted, report_file;
                if (o.result) {
                    const regularity::GridSolution sol{o.result->u, o.result->f};
                    const auto rep = regularity::regime_verdict(std::span(&sol, 1), table, coeff, opt,
                                                                s.config.face_average);
                    json j = report::regularity_report(rep, ctx.cfg.raw);
                    j["mode"] = std::string(to_string(ctx.cfg.mode));
                    j["seed"] = ctx.cfg.seed;
                    j["tuple"] = {{"m", m}, {"theta", theta}, {"n", n}};
                    j["runs"] = json::array({outcome_json(o, n)});
                    report_file = prefix + ".json";
                    ctx.write(j, report_file);
                    const auto& g = rep.grids.front();
                    sup = tag(g.sup_u);
                    if (g.weak_norm) wn = tag(*g.weak_norm);
                    if (g.fit) fitted = tag(-g.fit->slope);
                    if (!rep.passed()) {
                        status = "checks_failed";
                        any_check_failure = true;
                    }
                } else {
                    any_solver_failure = true;
                }
                csv << tag(m) << ',' << tag(theta) << ',' << n << ',' << regularity::to_string(table.regime) << ','
                    << status << ',' << sup << ',' << wn << ',' << fitted << ','
                    << (table.predicted_exponent ? tag(*table.predicted_exponent) : std::string()) << ','
                    << report_file << '\n';
                ctx.note("sweep m=" + tag(m) + " theta=" + tag(theta) + " N=" + std::to_string(n) + ": " + status);
            }
    const auto path = ctx.out / "sweep_summary.csv";
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open " + path.string() + " for writing");
    os << csv.str();
    ctx.note("wrote " + path.string());
    if (any_solver_failure) return kExitSolverFailure;
    return any_check_failure ? kExitVerificationFailed : kExitOk;
}

}  // namespace

int run(ExperimentConfig cfg, const RunOptions& opt, std::ostream& log) {
    if (opt.seed) {
        cfg.seed = *opt.seed;
        cfg.raw["seed"] = cfg.seed;
    }
    if (opt.out_dir) cfg.out_dir = *opt.out_dir;
    std::filesystem::create_directories(cfg.out_dir);
    const Context ctx{cfg, cfg.out_dir, log, opt.quiet};
    switch (cfg.mode) {
        case Mode::lemma_bound: return run_lemma_bound(ctx);
        case Mode::lemma_verify: return run_lemma_verify(ctx);
        case Mode::solve: return run_solve(ctx);
        case Mode::analyze: return run_analyze(ctx);
        case Mode::sweep: return run_sweep(ctx);
    }
    return kExitInputError;
}

int run_file(const std::filesystem::path& config, const RunOptions& opt, std::ostream& log, std::ostream& err) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config);
    } catch (const Error& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInputError;
    }
    try {
        return run(std::move(cfg), opt, log);
    } catch (const NonFinite& e) {
        err << "non-finite output: " << e.what() << '\n';
        return kExitSolverFailure;
    } catch (const ConvergenceError& e) {
        err << "solver did not converge: " << e.what() << '\n';
        return kExitSolverFailure;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitVerificationFailed;
    }
}

}  // namespace stampacchia::experiment

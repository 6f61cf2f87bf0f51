// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 if any
// criterion fails. Tolerances are fixed here, not read from a config.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stampacchia/experiment.hpp"
#include "stampacchia/lemma_engine.hpp"
#include "stampacchia/pde_solver.hpp"
#include "stampacchia/regularity.hpp"

using namespace stampacchia;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 42;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 6) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

lemma::LemmaParams params(double c, double alpha, double beta, double theta, double k0, double phi0) {
    lemma::LemmaParams p;
    p.c = c;
    p.alpha = alpha;
    p.beta = beta;
    p.theta = theta;
    p.k0 = k0;
    p.phi0 = phi0;
    return p;
}

// -- 1 ---------------------------------------------------------------------

Outcome constant_formulas() {
    using namespace lemma;
    const auto t0 = Clock::now();
    const double e = std::numbers::e;
    struct Item {
        const char* name;
        std::function<double()> got;
        double want;
    };
    const std::vector<Item> items{
        {"classical level", [] { return std::get<VanishingLevel>(classical_bound(params(1, 1, 2, 0, 0, 1)).shape).level; }, 4.0},
        {"classical tau", [] { return std::get<ExponentialDecay>(classical_bound(params(1 / std::numbers::e, 1, 1, 0, 1, 1)).shape).tau; }, 1.0},
        {"classical coefficient", [] { return std::get<PowerLawDecay>(classical_bound(params(1, 1, 0.5, 0, 1, 1)).shape).coefficient; }, 80.0},
        {"kv coefficient", [] { return std::get<PowerLawDecay>(kv_bound(params(1, 2, 0.5, 0.5, 1, 1)).shape).coefficient; }, 80.0},
        {"kv exponent", [] { return std::get<PowerLawDecay>(kv_bound(params(1, 2, 0.5, 0.5, 1, 1)).shape).exponent; }, 2.0},
        {"kv tau", [] { return std::get<ExponentialDecay>(kv_bound(params(1, 1, 1, 0.5, 1, 1)).shape).tau; }, e * e / 2},
        {"L", [] { return compute_L(params(1, 2, 2, 0.5, 1, 1)); }, std::pow(2.0, 3.5)},
        {"vanishing level 2L", [] { return std::get<VanishingLevel>(generalized_bound(params(1, 2, 2, 0.5, 1, 1)).shape).level; }, std::pow(2.0, 4.5)},
        {"L with phi0 = 0", [] { return compute_L(params(1, 2, 2, 0.5, 1, 0)); }, 2.0},
        {"L with huge k0", [] { return compute_L(params(2, 2, 2, 0, 1e6, 1)); }, 2e6},
        {"tau", [] { return compute_tau(params(1, 2, 1, 0.5, 1, 1)); }, 2 * e},
        {"tau at theta = 0", [] { return compute_tau(params(1 / std::numbers::e, 1, 1, 0, 1, 1)); }, 1.0},
        {"tau with large k0", [] { return compute_tau(params(1e-3, 1, 1, 0, 100, 1)); }, 100.0},
        {"c2", [] { return compute_power_constants(params(1, 2, 0.5, 0.5, 1, 1)).c2; }, 128.0},
        {"c1", [] { return compute_power_constants(params(1, 2, 0.5, 0.5, 1, 1)).c1; }, 8 * std::sqrt(2.0)},
        {"generalized coefficient", [] { return std::get<PowerLawDecay>(generalized_bound(params(1, 2, 0.5, 0.5, 1, 1)).shape).coefficient; }, 8256.0},
        {"c5", [] { return doubling_transfer(1, 1, 0.5, 1, 1).c5; }, 80.0},
        {"c4", [] { return doubling_transfer(1, 1, 0.5, 1, 1).c4; }, std::sqrt(80.0)},
    };
    std::string bad;
    for (const auto& it : items) {
        const double g = it.got();
        if (!(std::abs(g - it.want) <= 1e-12 * std::abs(it.want))) bad += std::string(" ") + it.name + "=" + fmt(g, 17);
    }
    const double dt = seconds_since(t0);
    Outcome o;
    o.pass = bad.empty() && dt < 1.0;
    o.detail = std::to_string(items.size()) + " values within 1e-12 relative, " + fmt(dt, 3) + " s" +
               (bad.empty() ? "" : "; mismatches:" + bad);
    return o;
}

// -- 2 ---------------------------------------------------------------------

Outcome oracle_domination() {
    const auto t0 = Clock::now();
    const std::vector<lemma::Variant> variants{lemma::Variant::classical, lemma::Variant::kv, lemma::Variant::generalized};
    const std::vector<lemma::Regime> regimes{lemma::Regime::vanishing, lemma::Regime::exponential, lemma::Regime::power_law};
    const auto cases = experiment::run_oracle_suite(variants, regimes, 200, kSeed);
    const double dt = seconds_since(t0);
    std::map<std::string, int> failures;
    double worst_rel = 0.0;
    for (const auto& c : cases) {
        if (c.params.phi0 > 0.0) worst_rel = std::max(worst_rel, c.verification.max_violation / c.params.phi0);
        if (!c.passed) {
            ++failures[std::string(lemma::to_string(c.variant)) + "/" +
                       std::string(lemma::to_string(lemma::regime_of(c.params.beta)))];
        }
    }
    std::string fail_text;
    for (const auto& [k, n] : failures) fail_text += " " + k + ":" + std::to_string(n) + "/200";
    Outcome o;
    o.pass = failures.empty() && dt < 60.0;
    o.detail = std::to_string(cases.size()) + " oracles, worst violation/phi0 " + fmt(worst_rel) + ", " + fmt(dt, 3) +
               " s" + (failures.empty() ? "" : "; failing groups:" + fail_text);
    return o;
}

// -- 3 ---------------------------------------------------------------------

Outcome theta_zero_reduction() {
    using namespace lemma;
    std::mt19937_64 rng(kSeed + 3);
    int bad = 0;
    for (int t = 0; t < 100; ++t) {
        const Regime r = t % 2 == 0 ? Regime::power_law : Regime::exponential;
        auto p = experiment::random_lemma_params(r, rng);
        p.theta = 0.0;
        const auto cl = classical_bound(p);
        for (const auto& b : {kv_bound(p), generalized_bound(p)}) {
            if (r == Regime::power_law) {
                const auto* a = std::get_if<PowerLawDecay>(&b.shape);
                if (!a || a->exponent != std::get<PowerLawDecay>(cl.shape).exponent) ++bad;
            } else {
                const auto* a = std::get_if<ExponentialDecay>(&b.shape);
                const auto& c = std::get<ExponentialDecay>(cl.shape);
                if (!a || a->theta != 0.0 || c.theta != 0.0 || a->base_level != c.base_level) ++bad;
            }
        }
    }
    return {bad == 0, "100 tuples, " + std::to_string(bad) + " structural mismatches"};
}

// -- 4 ---------------------------------------------------------------------

Outcome iteration_lemma() {
    const lemma::IterationParams q{1.0, 2.0, 2.0, 0.5};
    const auto r = lemma::iteration_limit(q, 40);
    bool ok = r.converged && r.sequence.size() == 41;
    for (std::size_t i = 0; ok && i <= 40; ++i) {
        ok = r.sequence[i] == std::ldexp(1.0, -static_cast<int>(i) - 1) && r.sequence[i] == r.envelope(i, q);
    }
    const auto d = lemma::iteration_limit({1.0, 2.0, 2.0, 1.0}, 40);
    const bool diverges = !d.converged && d.sequence[3] == 16.0;
    return {ok && diverges, std::string("x_i = 2^-(i+1) for i <= 40: ") + (ok ? "exact" : "mismatch") +
                                "; x0 = 1: " + (diverges ? "diverges" : "does not diverge")};
}

// -- 5 ---------------------------------------------------------------------

Outcome hypothesis_ordering() {
    using namespace lemma;
    std::mt19937_64 rng(kSeed + 5);
    const Regime regimes[] = {Regime::vanishing, Regime::exponential, Regime::power_law};
    int bad = 0;
    std::size_t compared = 0;
    for (int t = 0; t < 100; ++t) {
        const auto p = experiment::random_lemma_params(regimes[t % 3], rng);
        const auto grid = default_level_grid(p, Variant::generalized);
        const auto kv = extremal_level_function(p, Variant::kv, grid);
        const auto gen = extremal_level_function(p, Variant::generalized, grid);
        for (std::size_t i = 0; i < kv.values.size(); ++i, ++compared) {
            if (kv.values[i] > gen.values[i]) {
                ++bad;
                break;
            }
        }
    }
    return {bad == 0, "100 tuples, " + std::to_string(compared) + " levels compared, " + std::to_string(bad) +
                          " tuples with kv above generalized"};
}

// -- 6 to 9: solver runs ---------------------------------------------------

struct Solve {
    int n = 0;
    bool converged = false;
    std::string error;
    pde::PicardResult result;
    double seconds = 0.0;
};

Solve solve(double m, double theta, int n) {
    pde::CoefficientSpec c;
    c.theta = theta;
    pde::SourceSpec s;
    s.m = m;
    Solve out;
    out.n = n;
    const auto t0 = Clock::now();
    try {
        out.result = pde::picard_solve(c, s, n, pde::SolverConfig{});
        out.converged = out.result.iterations <= 60 && !out.result.history.empty() &&
                        out.result.history.back() <= 1e-8 && std::isfinite(out.result.u.max_abs());
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    out.seconds = seconds_since(t0);
    return out;
}

regularity::RegularityReport verdict(const std::vector<const Solve*>& runs, double m, double theta) {
    std::vector<regularity::GridSolution> sols;
    for (const auto* r : runs) sols.push_back({r->result.u, r->result.f});
    pde::CoefficientSpec c;
    c.theta = theta;
    regularity::AnalysisOptions opt;
    opt.seed = kSeed;
    return regularity::regime_verdict(sols, regularity::exponent_table(3, m, theta), c, opt);
}

const regularity::NamedCheck* find_check(const regularity::RegularityReport& r, const std::string& name) {
    for (const auto& c : r.checks)
        if (c.name == name) return &c;
    return nullptr;
}

std::string run_text(const Solve& s) {
    if (!s.converged) return "N=" + std::to_string(s.n) + " failed (" + s.error + ")";
    return "N=" + std::to_string(s.n) + " " + std::to_string(s.result.iterations) + " it, sup " +
           fmt(s.result.u.max_abs()) + ", " + fmt(s.seconds, 3) + " s";
}

Outcome bounded_regime(const Solve& a, const Solve& b) {
    if (!a.converged || !b.converged) return {false, run_text(a) + "; " + run_text(b)};
    const double sa = a.result.u.max_abs(), sb = b.result.u.max_abs();
    const double rel = std::abs(sa - sb) / std::max(sa, sb);
    const auto restricted = pde::restrict_to_coarse(b.result.u);
    double diff = 0.0;
    for (std::size_t i = 0; i < restricted.size(); ++i) diff = std::max(diff, std::abs(restricted[i] - a.result.u[i]));
    return {rel < 0.05, run_text(a) + "; " + run_text(b) + "; sup difference " + fmt(rel * 100, 4) +
                            "% (limit 5%); coarse-grid field difference " + fmt(diff / sb * 100, 4) + "% of sup"};
}

Outcome weak_power_regime(const Solve& a, const Solve& b, const regularity::RegularityReport* rep) {
    if (!a.converged || !b.converged || !rep) return {false, run_text(a) + "; " + run_text(b)};
    const auto* wn = find_check(*rep, "weak_norm_stability");
    const auto* rc = find_check(*rep, "recursion_constant_stability");
    const auto* fin = find_check(*rep, "weak_norm_finite");
    const bool pass = wn && rc && fin && wn->passed && rc->passed && fin->passed;
    std::string d = "p = " + fmt(*rep->table.predicted_exponent) + "; weak norm N48 " +
                    fmt(rep->grids[0].weak_norm.value_or(NAN)) + ", N64 " + fmt(rep->grids[1].weak_norm.value_or(NAN));
    if (wn) d += " (ratio " + fmt(wn->value, 4) + ")";
    d += "; recursion constant N48 " + fmt(rep->grids[0].recursion_constant.value_or(NAN)) + ", N64 " +
         fmt(rep->grids[1].recursion_constant.value_or(NAN));
    if (rc) d += " (ratio " + fmt(rc->value, 4) + ")";
    return {pass, d};
}

Outcome energy_inequality(const std::vector<const regularity::RegularityReport*>& reps) {
    std::size_t checks = 0;
    int bad = 0;
    double worst = INFINITY;
    for (const auto* r : reps) {
        if (!r) return {false, "a solve in criteria 6-7 did not converge"};
        for (const auto& g : r->grids)
            for (const auto& e : g.energy) {
                ++checks;
                const double margin = e.residual + 0.05 * std::abs(e.rhs);
                if (margin < 0.0) ++bad;
                if (e.rhs != 0.0) worst = std::min(worst, e.residual / std::abs(e.rhs));
            }
    }
    const bool enough = checks == 20 * 4;
    return {bad == 0 && enough, std::to_string(checks) + " (k,h) pairs over 4 solves, " + std::to_string(bad) +
                                    " below -0.05|RHS|, smallest residual/|RHS| " + fmt(worst)};
}

Outcome exponential_regime(const Solve& s, const regularity::RegularityReport* rep) {
    if (!s.converged || !rep || !rep->exp_params || !rep->series) return {false, run_text(s)};
    const double id = rep->exp_params->identity_error();
    const bool pass = rep->series->converged && std::isfinite(rep->series->sum) && id <= 1e-12;
    return {pass, run_text(s) + "; tau " + fmt(rep->exp_params->tau) + ", lambda " + fmt(rep->exp_params->lambda) +
                      ", identity error " + fmt(id, 3) + "; series sum " + fmt(rep->series->sum) + " over " +
                      std::to_string(rep->series->terms) + " terms, " +
                      (rep->series->converged ? "converged" : "not converged")};
}

// -- 10 --------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::ifstream is(e.path(), std::ios::binary);
        std::ostringstream os;
        os << is.rdbuf();
        files[e.path().filename().string()] = os.str();
    }
    return files;
}

Outcome determinism() {
    using nlohmann::json;
    const fs::path root = STAMPACCHIA_TEST_TMP;
    const std::vector<std::pair<std::string, json>> configs{
        {"lemma_verify",
         {{"mode", "lemma-verify"},
          {"seed", kSeed},
          {"lemma_suite", {{"tuples", 20}, {"variants", {"classical", "kv", "generalized"}}}}}},
        {"analyze",
         {{"mode", "analyze"},
          {"seed", kSeed},
          {"solver", {{"coefficient", {{"theta", 0.5}}}, {"source", {{"m", 1.3}}}, {"grids", {12, 16}}}}}},
        {"sweep",
         {{"mode", "sweep"},
          {"seed", kSeed},
          {"solver", {{"source", {{"m", 2}}}, {"grids", {8}}}},
          {"sweep", {{"m", {2.0, 1.5, 1.3, 1.1}}, {"theta", {0.0, 0.5}}}}}},
    };
    std::size_t compared = 0;
    std::string bad;
    for (const auto& [name, cfg] : configs) {
        std::map<std::string, std::string> first;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path dir = root / (name + "_" + std::to_string(rep));
            fs::remove_all(dir);
            fs::create_directories(dir);
            std::ofstream(dir / "config.json") << cfg.dump(2);
            experiment::RunOptions opt;
            opt.out_dir = dir / "out";
            opt.quiet = true;
            std::ostringstream log, err;
            experiment::run_file(dir / "config.json", opt, log, err);
            auto files = snapshot(dir / "out");
            if (rep == 0) {
                first = std::move(files);
            } else {
                if (files.size() != first.size()) bad += " " + name + ":file-set";
                for (const auto& [f, bytes] : files) {
                    ++compared;
                    if (first[f] != bytes) bad += " " + name + "/" + f;
                }
            }
        }
    }
    return {bad.empty() && compared > 0,
            std::to_string(compared) + " report files compared across repeated runs" +
                (bad.empty() ? ", all byte-identical" : "; differing:" + bad)};
}

void print(int id, const char* name, const Outcome& o) {
    std::printf("CRITERION %2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
}

template <typename F>
Outcome guarded(F&& f) {
    try {
        return f();
    } catch (const std::exception& e) {
        return {false, std::string("error: ") + e.what()};
    }
}

}  // namespace

int main() {
    std::vector<bool> results;
    const auto record = [&](int id, const char* name, const Outcome& o) {
        print(id, name, o);
        results.push_back(o.pass);
    };

    record(1, "constant formulas", guarded(constant_formulas));
    record(2, "oracle domination", guarded(oracle_domination));
    record(3, "theta = 0 reduction", guarded(theta_zero_reduction));
    record(4, "iteration lemma", guarded(iteration_lemma));
    record(5, "hypothesis ordering", guarded(hypothesis_ordering));

    const Solve b32 = solve(2.0, 0.5, 32), b64 = solve(2.0, 0.5, 64);
    const Solve w48 = solve(1.3, 0.5, 48), w64 = solve(1.3, 0.5, 64);
    const Solve e48 = solve(1.5, 0.5, 48);
    std::optional<regularity::RegularityReport> bounded_rep, weak_rep, exp_rep;
    try {
        if (b32.converged && b64.converged) bounded_rep = verdict({&b32, &b64}, 2.0, 0.5);
        if (w48.converged && w64.converged) weak_rep = verdict({&w48, &w64}, 1.3, 0.5);
        if (e48.converged) exp_rep = verdict({&e48}, 1.5, 0.5);
    } catch (const std::exception& e) {
        std::printf("analysis error: %s\n", e.what());
    }
    const auto ptr = [](const std::optional<regularity::RegularityReport>& r) { return r ? &*r : nullptr; };

    record(6, "bounded regime", guarded([&] { return bounded_regime(b32, b64); }));
    record(7, "weak-power regime", guarded([&] { return weak_power_regime(w48, w64, ptr(weak_rep)); }));
    record(8, "energy inequality", guarded([&] { return energy_inequality({ptr(bounded_rep), ptr(weak_rep)}); }));
    record(9, "exponential regime", guarded([&] { return exponential_regime(e48, ptr(exp_rep)); }));
    record(10, "determinism", guarded(determinism));

    const auto passed = std::count(results.begin(), results.end(), true);
    std::printf("acceptance: %ld/%zu criteria passed\n", static_cast<long>(passed), results.size());
    return passed == static_cast<long>(results.size()) ? 0 : 1;
}

#include "stampacchia/pde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "stampacchia/errors.hpp"

namespace stampacchia::pde {

// -- coefficient -----------------------------------------------------------

void CoefficientSpec::validate() const {
    if (!(alpha_low > 0.0) || !std::isfinite(alpha_low)) throw DomainError("alpha_low must be positive");
    if (!(beta_high >= alpha_low) || !std::isfinite(beta_high)) {
        throw DomainError("beta_high must be finite and >= alpha_low");
    }
    if (!(theta >= 0.0 && theta < 1.0)) throw DomainError("theta must lie in [0, 1)");
    if (form == CoefficientForm::table) {
        if (table.empty()) throw DomainError("coefficient table is empty");
        for (std::size_t i = 0; i < table.size(); ++i) {
            const auto [s, a] = table[i];
            if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("table abscissae must be >= 0");
            if (i > 0 && !(s > table[i - 1].first)) {
                throw DomainError("table abscissae must be strictly ascending");
            }
            // The envelope is convex and decreasing, so checking the nodes
            // covers the interpolant and the constant extension.
            if (!(a >= envelope(s) && a <= beta_high)) {
                throw DomainError("table value at |s| = " + std::to_string(s) +
                                  " violates alpha/(1+|s|)^theta <= a <= beta");
            }
        }
        if (table.front().first > 0.0 && table.front().second < alpha_low) {
            throw DomainError("table must dominate alpha_low below its first node");
        }
    }
}

double CoefficientSpec::envelope(double s) const {
    return alpha_low / std::pow(1.0 + std::abs(s), theta);
}

double CoefficientSpec::operator()(double s) const {
    if (form == CoefficientForm::lower_envelope) return envelope(s);
    const double x = std::abs(s);
    if (x <= table.front().first) return table.front().second;
    if (x >= table.back().first) return table.back().second;
    auto it = std::upper_bound(table.begin(), table.end(), x,
                               [](double v, const auto& node) { return v < node.first; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double t = (x - lo.first) / (hi.first - lo.first);
    return lo.second + t * (hi.second - lo.second);
}

bool CoefficientSpec::depends_on_solution() const {
    if (form == CoefficientForm::lower_envelope) return theta != 0.0;
    return std::any_of(table.begin(), table.end(),
                       [&](const auto& node) { return node.second != table.front().second; });
}

void SourceSpec::validate() const {
    switch (kind) {
        case SourceKind::radial_power:
            if (!(m > 1.0) || !std::isfinite(m)) throw DomainError("source exponent m must exceed 1");
            if (!(scale >= 0.0) || !std::isfinite(scale)) throw DomainError("source scale must be >= 0");
            if (cap && !(*cap > 0.0)) throw DomainError("source cap must be positive");
            for (double c : center) {
                if (!(c >= 0.0 && c <= 1.0)) throw DomainError("source centre must lie in the unit cube");
            }
            break;
        case SourceKind::constant:
            if (!std::isfinite(value)) throw DomainError("constant source must be finite");
            break;
        case SourceKind::custom:
            if (!function) throw DomainError("custom source needs a function");
            break;
    }
}

std::string_view to_string(FaceAverage a) {
    return a == FaceAverage::harmonic ? "harmonic" : "arithmetic";
}

void SolverConfig::validate() const {
    if (!(picard_tol > 0.0 && picard_tol < 1.0)) throw DomainError("picard_tol must lie in (0, 1)");
    if (!(cg_tol > 0.0 && cg_tol < 1.0)) throw DomainError("cg_tol must lie in (0, 1)");
    if (picard_max_iters < 1) throw DomainError("picard_max_iters must be >= 1");
    if (cg_max_iters < 1) throw DomainError("cg_max_iters must be >= 1");
    if (!(damping > 0.0 && damping <= 1.0)) throw DomainError("damping must lie in (0, 1]");
}

// -- faces -----------------------------------------------------------------

double FaceCoefficients::min() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto* v : {&x, &y, &z})
        for (double a : *v) m = std::min(m, a);
    return m;
}

double FaceCoefficients::max() const {
    double m = 0.0;
    for (const auto* v : {&x, &y, &z})
        for (double a : *v) m = std::max(m, a);
    return m;
}

FaceCoefficients uniform_faces(int n, double a) {
    FaceCoefficients f;
    f.n = n;
    const auto count = static_cast<std::size_t>(n + 1) * n * n;
    f.x.assign(count, a);
    f.y.assign(count, a);
    f.z.assign(count, a);
    return f;
}

double face_mean(double a, double b, FaceAverage average) {
    if (average == FaceAverage::arithmetic) return 0.5 * (a + b);
    return 2.0 * a * b / (a + b);
}

FaceCoefficients face_coefficients(const CoefficientSpec& coeff, const GridField& u,
                                   FaceAverage average) {
    const int n = u.n();
    GridField cell(n);
    for (std::size_t c = 0; c < u.size(); ++c) cell[c] = coeff(u[c]);

    FaceCoefficients f = uniform_faces(n, 0.0);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i <= n; ++i) {
                double a;
                if (i == 0) a = cell(0, j, k);
                else if (i == n) a = cell(n - 1, j, k);
                else a = face_mean(cell(i - 1, j, k), cell(i, j, k), average);
                f.x[f.x_index(i, j, k)] = a;
            }
    for (int k = 0; k < n; ++k)
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i < n; ++i) {
                double a;
                if (j == 0) a = cell(i, 0, k);
                else if (j == n) a = cell(i, n - 1, k);
                else a = face_mean(cell(i, j - 1, k), cell(i, j, k), average);
                f.y[f.y_index(i, j, k)] = a;
            }
    for (int k = 0; k <= n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                double a;
                if (k == 0) a = cell(i, j, 0);
                else if (k == n) a = cell(i, j, n - 1);
                else a = face_mean(cell(i, j, k - 1), cell(i, j, k), average);
                f.z[f.z_index(i, j, k)] = a;
            }
    return f;
}

// -- sources ---------------------------------------------------------------

GridField sample_source(const SourceSpec& s, int n) {
    s.validate();
    GridField f(n);
    switch (s.kind) {
        case SourceKind::constant:
            for (auto& v : f.values()) v = s.value;
            return f;
        case SourceKind::custom:
            for (int k = 0; k < n; ++k)
                for (int j = 0; j < n; ++j)
                    for (int i = 0; i < n; ++i) f(i, j, k) = s.function(f.center(i, j, k));
            return f;
        case SourceKind::radial_power:
            break;
    }
    if (s.scale == 0.0) return f;
    const double power = -3.0 / s.m;
    std::optional<double> cap = s.cap;
    if (!cap && s.auto_cap) cap = s.scale * std::pow(0.5 * f.spacing(), power);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const auto x = f.center(i, j, k);
                const double r = std::hypot(x[0] - s.center[0], x[1] - s.center[1], x[2] - s.center[2]);
                if (r == 0.0 && !cap) {
                    throw InputError("uncapped source singularity sits on a cell centre");
                }
                double v = r == 0.0 ? *cap : s.scale * std::pow(r, power);
                if (cap) v = std::min(v, *cap);
                f(i, j, k) = v;
            }
    return f;
}

double weak_norm(const GridField& field, double m) {
    if (!(m > 1.0)) throw DomainError("weak_norm needs m > 1");
    std::vector<double> mags(field.size());
    std::transform(field.values().begin(), field.values().end(), mags.begin(),
                   [](double v) { return std::abs(v); });
    std::sort(mags.begin(), mags.end(), std::greater<>());
    const double vol = field.cell_volume();
    double best = 0.0;
    for (std::size_t i = 1; i < mags.size(); ++i) {
        if (mags[i] == 0.0) break;
        // exactly i cells have |f| > mags[i] at the start of a tie run
        if (mags[i] == mags[i - 1]) continue;
        best = std::max(best, std::pow(mags[i], m) * vol * static_cast<double>(i));
    }
    // levels just below the smallest nonzero magnitude
    const auto nz = std::find(mags.begin(), mags.end(), 0.0) - mags.begin();
    if (nz > 0) best = std::max(best, std::pow(mags[nz - 1], m) * vol * static_cast<double>(nz));
    return best;
}

double holder_constant(double gamma, double m) {
    if (!(m > 1.0)) throw DomainError("holder_constant needs m > 1");
    return m / (m - 1.0) * std::pow(gamma, 1.0 / m);
}

std::vector<std::size_t> cells_in_box(int n, std::array<int, 3> lo, std::array<int, 3> hi) {
    std::vector<std::size_t> out;
    GridField shape(n);
    for (int d = 0; d < 3; ++d) {
        lo[d] = std::clamp(lo[d], 0, n);
        hi[d] = std::clamp(hi[d], 0, n);
    }
    for (int k = lo[2]; k < hi[2]; ++k)
        for (int j = lo[1]; j < hi[1]; ++j)
            for (int i = lo[0]; i < hi[0]; ++i) out.push_back(shape.index(i, j, k));
    return out;
}

bool holder_check(const GridField& field, std::span<const std::size_t> cells, double m,
                  std::optional<double> B) {
    if (cells.empty()) return true;
    const double b = B ? *B : holder_constant(weak_norm(field, m), m);
    double integral = 0.0;
    for (std::size_t c : cells) integral += std::abs(field[c]);
    integral *= field.cell_volume();
    const double measure = static_cast<double>(cells.size()) * field.cell_volume();
    return integral <= b * std::pow(measure, 1.0 - 1.0 / m);
}

// -- truncation ------------------------------------------------------------

double truncate(double v, double ell) {
    if (!(ell > 0.0)) throw DomainError("truncation level must be positive");
    return std::clamp(v, -ell, ell);
}

GridField truncate(const GridField& v, double ell) {
    GridField out = v;
    for (auto& x : out.values()) x = truncate(x, ell);
    return out;
}

double excess(double v, double k) { return v - truncate(v, k); }

GridField excess(const GridField& v, double k) {
    GridField out = v;
    for (auto& x : out.values()) x = excess(x, k);
    return out;
}

// -- linear solve ----------------------------------------------------------

void apply_operator(const FaceCoefficients& faces, const GridField& u, GridField& out) {
    const int n = u.n();
    if (faces.n != n) throw InputError("face coefficients and field sizes differ");
    if (out.n() != n) out = GridField(n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double up = u(i, j, k);
                double s = 0.0;
                const double axm = faces.x[faces.x_index(i, j, k)];
                const double axp = faces.x[faces.x_index(i + 1, j, k)];
                const double aym = faces.y[faces.y_index(i, j, k)];
                const double ayp = faces.y[faces.y_index(i, j + 1, k)];
                const double azm = faces.z[faces.z_index(i, j, k)];
                const double azp = faces.z[faces.z_index(i, j, k + 1)];
                s += i > 0 ? axm * (up - u(i - 1, j, k)) : 2.0 * axm * up;
                s += i < n - 1 ? axp * (up - u(i + 1, j, k)) : 2.0 * axp * up;
                s += j > 0 ? aym * (up - u(i, j - 1, k)) : 2.0 * aym * up;
                s += j < n - 1 ? ayp * (up - u(i, j + 1, k)) : 2.0 * ayp * up;
                s += k > 0 ? azm * (up - u(i, j, k - 1)) : 2.0 * azm * up;
                s += k < n - 1 ? azp * (up - u(i, j, k + 1)) : 2.0 * azp * up;
                out(i, j, k) = s;
            }
}

namespace {

GridField operator_diagonal(const FaceCoefficients& faces) {
    const int n = faces.n;
    GridField d(n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                auto w = [](bool boundary) { return boundary ? 2.0 : 1.0; };
                d(i, j, k) = w(i == 0) * faces.x[faces.x_index(i, j, k)] +
                             w(i == n - 1) * faces.x[faces.x_index(i + 1, j, k)] +
                             w(j == 0) * faces.y[faces.y_index(i, j, k)] +
                             w(j == n - 1) * faces.y[faces.y_index(i, j + 1, k)] +
                             w(k == 0) * faces.z[faces.z_index(i, j, k)] +
                             w(k == n - 1) * faces.z[faces.z_index(i, j, k + 1)];
            }
    return d;
}

// Fixed-order accumulation keeps repeated runs bit-identical.
double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

GridField assemble_and_solve_linear(const FaceCoefficients& faces, const GridField& f,
                                    const SolverConfig& cfg, LinearSolveStats* stats,
                                    const GridField* initial_guess) {
    cfg.validate();
    const int n = f.n();
    if (faces.n != n) throw InputError("face coefficients and source sizes differ");
    if (!(faces.min() > 0.0)) throw DomainError("face coefficients must be positive");

    const double h2 = f.spacing() * f.spacing();
    GridField b = f;
    for (auto& v : b.values()) v *= h2;
    const double b_norm = std::sqrt(dot(b.values(), b.values()));

    GridField x(n);
    if (initial_guess && initial_guess->n() == n) x = *initial_guess;
    if (b_norm == 0.0) {
        if (stats) *stats = {0, 0.0};
        return GridField(n);
    }

    const GridField diag = operator_diagonal(faces);
    GridField r(n), z(n), p(n), ap(n);
    apply_operator(faces, x, ap);
    for (std::size_t c = 0; c < r.size(); ++c) r[c] = b[c] - ap[c];
    double res = std::sqrt(dot(r.values(), r.values())) / b_norm;
    if (res <= cfg.cg_tol) {
        if (stats) *stats = {0, res};
        return x;
    }
    for (std::size_t c = 0; c < r.size(); ++c) z[c] = r[c] / diag[c];
    p = z;
    double rz = dot(r.values(), z.values());
    for (int it = 1; it <= cfg.cg_max_iters; ++it) {
        apply_operator(faces, p, ap);
        const double step = rz / dot(p.values(), ap.values());
        for (std::size_t c = 0; c < x.size(); ++c) {
            x[c] += step * p[c];
            r[c] -= step * ap[c];
        }
        res = std::sqrt(dot(r.values(), r.values())) / b_norm;
        if (res <= cfg.cg_tol) {
            if (stats) *stats = {it, res};
            return x;
        }
        for (std::size_t c = 0; c < r.size(); ++c) z[c] = r[c] / diag[c];
        const double rz_new = dot(r.values(), z.values());
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t c = 0; c < p.size(); ++c) p[c] = z[c] + beta * p[c];
    }
    throw ConvergenceError("CG did not reach relative residual " + std::to_string(cfg.cg_tol) +
                               " in " + std::to_string(cfg.cg_max_iters) + " iterations",
                           res);
}

// -- Picard ----------------------------------------------------------------

PicardResult picard_solve(const CoefficientSpec& coeff, const SourceSpec& src, int n,
                          const SolverConfig& cfg) {
    return picard_solve(coeff, sample_source(src, n), cfg);
}

PicardResult picard_solve(const CoefficientSpec& coeff, const GridField& f,
                          const SolverConfig& cfg) {
    coeff.validate();
    cfg.validate();
    for (double v : f.values()) {
        if (!std::isfinite(v)) throw InputError("source field has non-finite values");
    }
    PicardResult result;
    result.f = f;
    GridField u(f.n());
    const bool frozen_exact = !coeff.depends_on_solution() && cfg.damping == 1.0;
    for (int it = 1; it <= cfg.picard_max_iters; ++it) {
        const auto faces = face_coefficients(coeff, u, cfg.face_average);
        LinearSolveStats stats;
        GridField w = assemble_and_solve_linear(faces, f, cfg, &stats, &u);
        if (cfg.damping < 1.0) {
            for (std::size_t c = 0; c < w.size(); ++c) w[c] = u[c] + cfg.damping * (w[c] - u[c]);
        }
        double diff = 0.0;
        for (std::size_t c = 0; c < w.size(); ++c) diff = std::max(diff, std::abs(w[c] - u[c]));
        const double scale = w.max_abs();
        const double change = scale > 0.0 ? diff / scale : (diff > 0.0 ? 1.0 : 0.0);
        if (!std::isfinite(change)) {
            throw ConvergenceError("Picard iterate became non-finite", change, result.history);
        }
        result.history.push_back(change);
        result.cg_iterations.push_back(stats.iterations);
        u = std::move(w);
        result.iterations = it;
        if (frozen_exact || change <= cfg.picard_tol) {
            result.u = std::move(u);
            return result;
        }
    }
    throw ConvergenceError("Picard iteration did not reach relative change " +
                               std::to_string(cfg.picard_tol) + " in " +
                               std::to_string(cfg.picard_max_iters) + " iterations",
                           result.history.empty() ? 0.0 : result.history.back(), result.history);
}

}  // namespace stampacchia::pde

#pragma once

// Finite-volume solver for
//
//     -div(a(x, u) Du) = f  in the unit cube,   u = 0 on the boundary,
//
// with alpha / (1 + |s|)^theta <= a(x, s) <= beta. The nonlinearity is
// handled by Picard iteration: freeze a at the previous iterate, solve the
// resulting symmetric 7-point system with Jacobi-preconditioned CG.

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "stampacchia/grid_field.hpp"

namespace stampacchia::pde {

enum class CoefficientForm { lower_envelope, table };

struct CoefficientSpec {
    double alpha_low = 1.0;
    double beta_high = 1.0;
    double theta = 0.0;
    CoefficientForm form = CoefficientForm::lower_envelope;
    // (|s|, a) nodes for the table form, ascending in |s|; piecewise linear
    // in between and constant past the last node.
    std::vector<std::pair<double, double>> table;

    void validate() const;

    /// alpha_low / (1 + |s|)^theta
    double envelope(double s) const;

    double operator()(double s) const;

    bool depends_on_solution() const;
};

enum class SourceKind { radial_power, constant, custom };

struct SourceSpec {
    SourceKind kind = SourceKind::radial_power;
    std::array<double, 3> center{0.5, 0.5, 0.5};
    double m = 2.0;  // radial_power: f = scale * |x - center|^(-3/m)
    double scale = 1.0;
    std::optional<double> cap;
    // Without an explicit cap, radial sources are capped at the value
    // attained at distance h/2 from the centre.
    bool auto_cap = true;
    double value = 0.0;  // constant kind
    std::function<double(const std::array<double, 3>&)> function;  // custom kind

    void validate() const;
};

enum class FaceAverage { harmonic, arithmetic };

std::string_view to_string(FaceAverage a);

struct SolverConfig {
    double picard_tol = 1e-8;
    int picard_max_iters = 60;
    double cg_tol = 1e-11;
    int cg_max_iters = 20000;
    FaceAverage face_average = FaceAverage::harmonic;
    double damping = 1.0;  // in (0, 1]

    void validate() const;
};

/// Coefficients on cell faces. x-faces are indexed i + (N+1)(j + N k) with
/// i = 0..N, and analogously for y and z. Boundary faces carry the
/// coefficient used for the half-cell distance to the wall.
struct FaceCoefficients {
    int n = 0;
    std::vector<double> x, y, z;

    std::size_t x_index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(n + 1) * (j + static_cast<std::size_t>(n) * k);
    }
    std::size_t y_index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(n) * (j + static_cast<std::size_t>(n + 1) * k);
    }
    std::size_t z_index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(n) * (j + static_cast<std::size_t>(n) * k);
    }

    double min() const;
    double max() const;
};

FaceCoefficients uniform_faces(int n, double a);

/// Face values of a(x, u) from the two adjacent cell values (harmonic or
/// arithmetic mean). Boundary faces take the adjacent cell value.
FaceCoefficients face_coefficients(const CoefficientSpec& coeff, const GridField& u,
                                   FaceAverage average);

double face_mean(double a, double b, FaceAverage average);

// -- sources ---------------------------------------------------------------

/// Cell-centre samples of the source.
GridField sample_source(const SourceSpec& s, int n);

/// sup over lambda of lambda^m |{|f| > lambda}|, evaluated on the discrete
/// field. The supremum is a left limit at each distinct |f| value, so it is
/// computed as max_j v_j^m * |{|f| >= v_j}|.
double weak_norm(const GridField& field, double m);

/// Layer-cake constant m/(m-1) * gamma^(1/m) for the Hoelder bound
/// int_E |f| <= B |E|^(1 - 1/m).
double holder_constant(double gamma, double m);

/// Flat indices of the cells in the half-open index box [lo, hi).
std::vector<std::size_t> cells_in_box(int n, std::array<int, 3> lo, std::array<int, 3> hi);

/// True iff sum_{E} |f| h^3 <= B |E|^(1 - 1/m); B defaults to the layer-cake
/// constant of the field's own weak norm.
bool holder_check(const GridField& field, std::span<const std::size_t> cells, double m,
                  std::optional<double> B = std::nullopt);

// -- truncation ------------------------------------------------------------

/// T_ell(v): clamp to [-ell, ell].
double truncate(double v, double ell);
GridField truncate(const GridField& v, double ell);

/// G_k(v) = v - T_k(v).
double excess(double v, double k);
GridField excess(const GridField& v, double k);

// -- linear and nonlinear solves --------------------------------------------

/// (A u)_P = sum over interior faces a_f (u_P - u_N) + sum over boundary
/// faces 2 a_f u_P. This is the finite-volume operator scaled by 1/h.
void apply_operator(const FaceCoefficients& faces, const GridField& u, GridField& out);

struct LinearSolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Solves A w = f h^2 (the finite-volume balance with volume factor h^3,
/// divided by h like the operator). Throws ConvergenceError when
/// cg_max_iters is exceeded.
GridField assemble_and_solve_linear(const FaceCoefficients& faces, const GridField& f,
                                    const SolverConfig& cfg, LinearSolveStats* stats = nullptr,
                                    const GridField* initial_guess = nullptr);

struct PicardResult {
    GridField u;
    GridField f;
    int iterations = 0;
    std::vector<double> history;  // relative sup-norm change per iteration
    std::vector<int> cg_iterations;
};

/// Picard iteration from u = 0. Stops when the relative sup-norm change is
/// <= picard_tol, or after one solve when a does not depend on u. Throws
/// ConvergenceError (carrying the history) after picard_max_iters.
PicardResult picard_solve(const CoefficientSpec& coeff, const SourceSpec& src, int n,
                          const SolverConfig& cfg);
PicardResult picard_solve(const CoefficientSpec& coeff, const GridField& f,
                          const SolverConfig& cfg);

}  // namespace stampacchia::pde

#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "fdnet/grid.hpp"
#include "fdnet/tensor.hpp"

namespace fdnet {

/// One benchmark case: a closed-form exact solution with analytically derived
/// source, Dirichlet data taken from the exact solution, and an optional
/// non-constant diffusion field. Steady problems ignore the time argument.
struct ProblemSpec {
    std::string name;
    double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
    std::function<double(double, double, double)> exact_u;
    std::function<double(double, double, double)> source_f;
    std::function<double(double, double)> kappa;  // null means constant 1
    bool time_dependent = false;
    double t0 = 0.0;

    bool constant_diffusion() const { return !kappa; }
    double boundary_g(double x, double y, double t) const { return exact_u(x, y, t); }

    GridSpec vertex_grid(int n) const {
        return GridSpec::vertex(n, x_min, x_max, y_min, y_max);
    }
    GridSpec cell_grid(int n_cells) const {
        return GridSpec::cells(n_cells, x_min, x_max, y_min, y_max);
    }
};

/// Registry of the benchmark cases:
/// bubble, peak, exptrig, kellogg (steady); trig1, trig4, gaussian (parabolic).
ProblemSpec make_problem(const std::string& name);
std::vector<std::string> problem_names();

/// Checkerboard-diffusion exact solution r^beta * (a_i sin(beta theta) +
/// b_i cos(beta theta)) with per-quadrant coefficients (a_i, b_i).
struct KelloggSolution {
    double beta = 0.0;
    std::array<double, 8> coeffs{};  // a1,b1,a2,b2,a3,b3,a4,b4

    double mu(double theta) const;
    double mu_prime(double theta) const;  // d mu / d theta
    double evaluate(double x, double y) const;
};

/// Smallest beta in (0,1) for which the 8x8 interface system (continuity of u
/// and of kappa * du/dtheta at the four quadrant interfaces) is singular,
/// found by bisection on the determinant; the nullspace vector is normalized
/// to max |coefficient| = 1. Throws ConfigError when no such beta exists
/// (uniform kappa).
KelloggSolution solve_kellogg_coefficients(const std::array<double, 4>& kappa_values);

/// Guard for the hand-coded source terms: compares source_f against a
/// fourth-order finite difference Laplacian (plus a fourth-order time
/// derivative for parabolic problems) of exact_u at the interior nodes.
/// Returns the max absolute discrepancy. Requires a smooth exact solution,
/// so the kellogg case is excluded.
double verify_source(const ProblemSpec& problem, const GridSpec& grid);

}  // namespace fdnet

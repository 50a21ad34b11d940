#pragma once

#include <functional>
#include <vector>

#include "fdnet/grid.hpp"
#include "fdnet/problems.hpp"
#include "fdnet/tensor.hpp"

namespace fdnet {

/// Compressed sparse row matrix; symmetric positive definite for every
/// elliptic system assembled here. Double precision throughout: this is the
/// oracle side of the artifact.
struct SparseOperator {
    int n_rows = 0;
    int n_cols = 0;
    std::vector<int> row_ptr;
    std::vector<int> col_idx;
    std::vector<double> values;

    static SparseOperator from_triplets(int rows, int cols,
                                        std::vector<std::tuple<int, int, double>> entries);

    void apply(const std::vector<double>& x, std::vector<double>& y) const;
    std::vector<double> apply(const std::vector<double>& x) const;
    std::vector<double> diagonal() const;
    /// I + tau * A, used by the implicit time stepper.
    SparseOperator identity_plus_scaled(double tau) const;
};

/// Interior-unknown system for -div(kappa grad u) = f with Dirichlet data
/// eliminated into the right-hand side. Unknown ordering is row-major over
/// interior nodes (i-1)*(n-2) + (j-1).
struct EllipticSystem {
    SparseOperator a;
    GridSpec grid;
    /// Dirichlet elimination: b[k] = f(node_k) + sum over boundary
    /// neighbours of kappa_edge * g(neighbour) / h^2.
    std::vector<double> rhs(const Tensor<double>& f, const Tensor<double>& g) const;

    // edge coefficients retained for the rhs assembly
    std::vector<double> boundary_weight;  // per (interior idx, side) flattened 4-wide
};

/// Assemble the five-point (or harmonic-averaged nine-entry) operator.
/// An empty kappa tensor means constant diffusion 1.
EllipticSystem assemble_elliptic(const Tensor<double>& kappa, const GridSpec& grid);

struct CgResult {
    int iterations = 0;
    double rel_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradient. Throws SolverError when the
/// relative residual fails to reach tol within max_iters.
CgResult cg_solve(const SparseOperator& a, const std::vector<double>& b,
                  std::vector<double>& x, double tol, int max_iters);

/// Finite difference solution of the steady problem on the given grid;
/// boundary nodes carry g exactly. CG at relative tolerance 1e-12.
Tensor<double> solve_elliptic(const ProblemSpec& problem, const GridSpec& grid);

/// Backward Euler marching (I + tau*A) u^n = u^{n-1} + tau*f^n with Dirichlet
/// data g^n each step; returns the field at t0 + n_steps*tau. The optional
/// observer sees every accepted step.
Tensor<double> solve_parabolic(
    const ProblemSpec& problem, const GridSpec& grid, double tau, int n_steps,
    const std::function<void(int, const Tensor<double>&)>& on_step = {});

}  // namespace fdnet

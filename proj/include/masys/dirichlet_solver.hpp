#pragma once

#include <optional>

#include "masys/ma_operator.hpp"

namespace masys {

enum class DirichletMethod {
    /// Semismooth Newton on the min-of-products scheme with backtracking,
    /// falling back to Gauss-Seidel sweeps when a step cannot be accepted.
    newton,
    /// Pure nonlinear Gauss-Seidel with exact per-node solves.
    gauss_seidel,
};

struct SolverConfig {
    double tol_residual = 1e-8;     // sup norm of MA(u) - f
    int max_outer_iterations = 10000;
    double damping = 1.0;           // initial Newton step, halved on backtracking
    double regularization = 0.0;    // smoothing width for x^+ in the Newton Jacobian
    int verbosity = 0;
    MaOptions ma{};
    DirichletMethod method = DirichletMethod::newton;

    void validate() const;
};

struct DirichletResult {
    ScalarField u;
    double residual = 0.0;
    int newton_steps = 0;
    int gauss_seidel_sweeps = 0;
};

/// Solves MA(u) = f in the domain with u = 0 on the boundary. `initial`, when
/// given, seeds the iteration (warm start); otherwise the Poisson field with
/// Laplacian n f^(1/n) is used.
///
/// Throws InvalidInput for negative f, NoConvergence when the residual is
/// still above tolerance after max_outer_iterations.
DirichletResult solve_dirichlet_detailed(const Grid& grid, const ScalarField& f, const SolverConfig& config = {},
                                         const ScalarField* initial = nullptr);

inline ScalarField solve_dirichlet(const Grid& grid, const ScalarField& f, const SolverConfig& config = {},
                                   const ScalarField* initial = nullptr) {
    return solve_dirichlet_detailed(grid, f, config, initial).u;
}

/// ||ma_det(u) - f||_inf.
double residual_sup(const Grid& grid, const ScalarField& u, const ScalarField& f, const MaOptions& opt = {});

/// One in-place Gauss-Seidel sweep: every node is set to the exact root of
/// its scalar equation MA(u0; neighbours) = f.
void gauss_seidel_sweep(const Grid& grid, const ScalarField& f, ScalarField& u);

/// Solution of the linear Dirichlet problem laplacian(u) = rhs.
ScalarField solve_poisson(const Grid& grid, const ScalarField& rhs);

/// Normalized solution of det D^2 psi = 1 (sup norm 1), the default starting
/// field of the spectral iterations.
ScalarField psi_field(const Grid& grid, const SolverConfig& config = {});

}  // namespace masys

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "masys/dirichlet_solver.hpp"

namespace masys {

/// Settings shared by the eigenvalue and coupled-system iterations.
struct SpectralConfig {
    SolverConfig inner{1e-10};       // inner Dirichlet solves
    double tol_lambda = 1e-10;        // relative change of lambda / sigma
    double tol_field = 1e-9;          // sup-norm change of the normalized field
    double tol_residual = 1e-8;       // system postcondition, scaled by (1 + sigma)
    int max_iterations = 500;

    void validate() const;
};

struct EigenIterate {
    double lambda_rayleigh = 0.0;
    double lambda_homogeneity = 0.0;
    double field_change = 0.0;
};

/// Monge-Ampere eigenpair: MA(w) = lambda |w|^n, w = 0 on the boundary,
/// normalized so that ||w||_inf = 1 and w <= 0.
struct EigenPair {
    double lambda = 0.0;
    ScalarField w;
    std::vector<EigenIterate> history;
};

struct SystemIterate {
    double sigma = 0.0;
    double field_change = 0.0;
};

/// Solution of MA(u) = sigma |v|^p, MA(v) = sigma |u|^(n^2/p) with
/// ||v||_inf = 1.
struct SystemSolution {
    double p = 0.0;
    double sigma = 0.0;
    ScalarField u;
    ScalarField v;
    double residual_u = 0.0;  // ||MA(u) - sigma |v|^p||_inf
    double residual_v = 0.0;  // ||MA(v) - sigma |u|^(n^2/p)||_inf
    std::vector<SystemIterate> history;
};

/// Discrete version of int |w| det D^2 w / int |w|^(n+1) with node-sum
/// quadrature. Throws InvalidInput("zero field") or ("nonconvex trial").
double rayleigh_quotient(const ScalarField& w, const Grid& grid, const MaOptions& opt = {});

/// Inverse power iteration w <- normalize(T(|w|^n)) where T solves the
/// Dirichlet problem. Starts from `initial` (any nonzero field, sign is
/// ignored) or from the normalized psi field.
EigenPair solve_eigen(const Grid& grid, const SpectralConfig& config = {}, const ScalarField* initial = nullptr);

/// Decoupled alternating iteration with renormalization ||v||_inf = 1 at
/// every step. `initial_v` defaults to the normalized psi field; `warm_u`
/// only seeds the first inner solve.
SystemSolution solve_system(const Grid& grid, double p, const SpectralConfig& config = {},
                            const ScalarField* initial_v = nullptr, const ScalarField* warm_u = nullptr);

/// Residual fields MA(u) - sigma |v|^p and MA(v) - sigma |u|^(n^2/p).
std::pair<ScalarField, ScalarField> system_residuals(const Grid& grid, double p, double sigma, const ScalarField& u,
                                                     const ScalarField& v, const MaOptions& opt = {});

/// The exponent identities that make both equations share one sigma:
/// u-scale a = b^(p/(p+n)), sigma = a^n for a v-scale b.
struct RenormalizationFactors {
    double a = 1.0;
    double b = 1.0;
    double sigma = 1.0;
};
RenormalizationFactors renormalization_factors(double v_hat_sup, double p);

struct ScaledPair {
    ScalarField u;
    ScalarField v;
};

/// (tau^(p/n) u, tau v): another solution of the same system.
ScaledPair scaling_map(const SystemSolution& sol, double tau);

struct SweepEntry {
    double p = 0.0;
    std::optional<SystemSolution> solution;
    std::string error;  // empty on success
};

/// Solves for each p in order, warm-starting from the previous converged
/// pair. Failures are recorded and the sweep continues.
std::vector<SweepEntry> sweep_p(const Grid& grid, const std::vector<double>& p_list, const SpectralConfig& config = {});

/// Like sweep_p but every p starts cold; runs up to `jobs` solves concurrently.
std::vector<SweepEntry> sweep_p_parallel(const Grid& grid, const std::vector<double>& p_list,
                                         const SpectralConfig& config, int jobs);

}  // namespace masys

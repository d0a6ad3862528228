#include "masys/dirichlet_solver.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "masys/errors.hpp"

namespace masys {

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kNegativeRhsTolerance = 1e-14;
constexpr int kFallbackSweeps = 25;
constexpr int kMaxBacktracks = 30;

void add_difference(std::vector<Triplet>& trips, int row, const DirectionalDifference& dd, double weight) {
    trips.emplace_back(row, row, -weight * dd.diag);
    if (dd.plus >= 0) trips.emplace_back(row, dd.plus, weight * dd.plus_coef);
    if (dd.minus >= 0) trips.emplace_back(row, dd.minus, weight * dd.minus_coef);
}

// Partial derivatives of pair_value with respect to its two differences.
std::pair<double, double> pair_gradient(double d1, double d2, double penalty, double eps) {
    double g1, g2;
    if (eps > 0.0) {
        auto pos = [eps](double x) { return 0.5 * (x + std::hypot(x, eps)); };
        auto dpos = [eps](double x) { return 0.5 * (1.0 + x / std::hypot(x, eps)); };
        g1 = dpos(d1) * pos(d2) + penalty * (1.0 - dpos(d1));
        g2 = dpos(d2) * pos(d1) + penalty * (1.0 - dpos(d2));
    } else {
        g1 = d1 >= 0.0 ? std::max(d2, 0.0) : penalty;
        g2 = d2 >= 0.0 ? std::max(d1, 0.0) : penalty;
    }
    if (g1 + g2 <= 0.0) {
        // Both differences vanish: the product has no slope, use the penalty branch.
        const double fallback = penalty > 0.0 ? penalty : 1.0;
        g1 = g2 = fallback;
    }
    return {g1, g2};
}

// Root of the scalar equation MA(t; neighbours) = f at one node.
double local_solve(const Grid& grid, const ScalarField& u, int node, double f) {
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid.stencil().pair_count(); ++k) {
        const DirectionalDifference a = directional_difference(u, grid, node, 2 * k);
        const DirectionalDifference b = directional_difference(u, grid, node, 2 * k + 1);
        // D = diag * (interp - t); interp is the value the neighbours would
        // give by linear interpolation along the ray.
        const double ra = (a.value + a.diag * u[node]) / a.diag;
        const double rb = (b.value + b.diag * u[node]) / b.diag;
        const double half_gap = 0.5 * (ra - rb);
        const double t = 0.5 * (ra + rb) - std::sqrt(half_gap * half_gap + f / (a.diag * b.diag));
        best = std::min(best, t);
    }
    return best;
}

ScalarField residual_field(const Grid& grid, const ScalarField& u, const ScalarField& f, const MaOptions& opt) {
    return ma_det(u, grid, opt) - f;
}

struct NewtonStep {
    bool ok = false;
    ScalarField delta;
};

NewtonStep newton_direction(const Grid& grid, const ScalarField& u, const ScalarField& res, const SolverConfig& cfg) {
    const int n = grid.interior_count();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(n) * 5);
    for (int node = 0; node < n; ++node) {
        int k = 0;
        ma_det_at(u, grid, node, cfg.ma, &k);
        const DirectionalDifference a = directional_difference(u, grid, node, 2 * k);
        const DirectionalDifference b = directional_difference(u, grid, node, 2 * k + 1);
        const auto [ga, gb] = pair_gradient(a.value, b.value, cfg.ma.penalty, cfg.regularization);
        add_difference(trips, node, a, ga);
        add_difference(trips, node, b, gb);
    }
    SparseMatrix jac(n, n);
    jac.setFromTriplets(trips.begin(), trips.end());
    jac.makeCompressed();

    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(jac);
    NewtonStep step;
    if (lu.info() != Eigen::Success) return step;
    step.delta = lu.solve(-res);
    step.ok = lu.info() == Eigen::Success && step.delta.allFinite();
    return step;
}

void check_rhs(const Grid& grid, const ScalarField& f) {
    if (f.size() != grid.interior_count()) throw InvalidInput("right-hand side size does not match the grid");
    if (!f.allFinite()) throw InvalidInput("right-hand side has non-finite entries");
    if (f.minCoeff() < -kNegativeRhsTolerance) {
        throw InvalidInput("negative rhs: min f = " + std::to_string(f.minCoeff()));
    }
}

}  // namespace

void SolverConfig::validate() const {
    if (!(tol_residual > 0.0)) throw InvalidInput("tol_residual must be positive");
    if (max_outer_iterations < 1) throw InvalidInput("max_outer_iterations must be >= 1");
    if (!(damping > 0.0 && damping <= 1.0)) throw InvalidInput("damping must lie in (0, 1]");
    if (!(regularization >= 0.0)) throw InvalidInput("regularization must be >= 0");
    if (!(ma.penalty >= 0.0)) throw InvalidInput("penalty must be >= 0");
}

double residual_sup(const Grid& grid, const ScalarField& u, const ScalarField& f, const MaOptions& opt) {
    return residual_field(grid, u, f, opt).lpNorm<Eigen::Infinity>();
}

void gauss_seidel_sweep(const Grid& grid, const ScalarField& f, ScalarField& u) {
    for (int node = 0; node < grid.interior_count(); ++node) u[node] = local_solve(grid, u, node, std::max(f[node], 0.0));
}

ScalarField solve_poisson(const Grid& grid, const ScalarField& rhs) {
    const int n = grid.interior_count();
    const ScalarField zero = ScalarField::Zero(n);
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(n) * 5);
    for (int node = 0; node < n; ++node) {
        add_difference(trips, node, directional_difference(zero, grid, node, 0), 1.0);
        add_difference(trips, node, directional_difference(zero, grid, node, 1), 1.0);
    }
    SparseMatrix lap(n, n);
    lap.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(lap);
    if (lu.info() != Eigen::Success) throw std::runtime_error("Poisson matrix factorization failed");
    return lu.solve(rhs);
}

DirichletResult solve_dirichlet_detailed(const Grid& grid, const ScalarField& f_in, const SolverConfig& cfg,
                                         const ScalarField* initial) {
    cfg.validate();
    check_rhs(grid, f_in);
    const ScalarField f = f_in.cwiseMax(0.0);
    const int n = grid.interior_count();

    DirichletResult out;
    if (f.maxCoeff() == 0.0) {
        // The zero field is the convex solution and MA(0) = 0 exactly.
        out.u = ScalarField::Zero(n);
        return out;
    }

    ScalarField u;
    if (initial) {
        if (initial->size() != n) throw InvalidInput("initial field size does not match the grid");
        u = *initial;
    } else {
        u = solve_poisson(grid, static_cast<double>(kDim) * f.array().pow(1.0 / kDim).matrix());
    }

    ScalarField res = residual_field(grid, u, f, cfg.ma);
    double r = res.lpNorm<Eigen::Infinity>();
    int outer = 0;
    while (r > cfg.tol_residual && outer < cfg.max_outer_iterations) {
        ++outer;
        bool accepted = false;
        if (cfg.method == DirichletMethod::newton) {
            const NewtonStep step = newton_direction(grid, u, res, cfg);
            if (step.ok) {
                double alpha = cfg.damping;
                for (int bt = 0; bt < kMaxBacktracks; ++bt, alpha *= 0.5) {
                    ScalarField trial = u + alpha * step.delta;
                    ScalarField trial_res = residual_field(grid, trial, f, cfg.ma);
                    const double tr = trial_res.lpNorm<Eigen::Infinity>();
                    if (tr < r) {
                        u = std::move(trial);
                        res = std::move(trial_res);
                        r = tr;
                        accepted = true;
                        break;
                    }
                }
            }
            if (accepted) ++out.newton_steps;
        }
        if (!accepted) {
            const int sweeps = cfg.method == DirichletMethod::newton ? kFallbackSweeps : 1;
            for (int s = 0; s < sweeps; ++s) gauss_seidel_sweep(grid, f, u);
            out.gauss_seidel_sweeps += sweeps;
            res = residual_field(grid, u, f, cfg.ma);
            r = res.lpNorm<Eigen::Infinity>();
        }
        if (cfg.verbosity > 1) std::cerr << "  dirichlet iteration " << outer << " residual " << r << "\n";
    }
    if (r > cfg.tol_residual) throw NoConvergence("dirichlet solve: no convergence", r, outer);
    out.u = std::move(u);
    out.residual = r;
    return out;
}

ScalarField psi_field(const Grid& grid, const SolverConfig& config) {
    ScalarField psi = solve_dirichlet(grid, ScalarField::Ones(grid.interior_count()), config);
    return psi / psi.lpNorm<Eigen::Infinity>();
}

}  // namespace masys

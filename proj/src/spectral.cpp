#include "masys/spectral.hpp"

#include <cmath>
#include <future>
#include <iostream>

#include "masys/errors.hpp"

namespace masys {

namespace {

constexpr double kZeroField = 1e-14;

double sup(const ScalarField& x) { return x.lpNorm<Eigen::Infinity>(); }

ScalarField abs_pow(const ScalarField& x, double e) { return x.cwiseAbs().array().pow(e).matrix(); }

// Nonpositive field with sup norm 1 from any nonzero starting guess.
ScalarField normalized_start(const ScalarField& x, const Grid& grid) {
    if (x.size() != grid.interior_count()) throw InvalidInput("initial field size does not match the grid");
    const double m = sup(x);
    if (!(m > kZeroField)) throw InvalidInput("zero field: initial guess vanishes");
    return -x.cwiseAbs() / m;
}

}  // namespace

void SpectralConfig::validate() const {
    inner.validate();
    if (!(tol_lambda > 0.0) || !(tol_field > 0.0) || !(tol_residual > 0.0))
        throw InvalidInput("spectral tolerances must be positive");
    if (max_iterations < 1) throw InvalidInput("max_iterations must be >= 1");
}

double rayleigh_quotient(const ScalarField& w, const Grid& grid, const MaOptions& opt) {
    if (w.size() != grid.interior_count()) throw InvalidInput("field size does not match the grid");
    if (!(sup(w) >= kZeroField)) throw InvalidInput("zero field");
    if (!is_discretely_convex(w, grid, 1e-8 * sup(w))) throw InvalidInput("nonconvex trial");
    const ScalarField ma = ma_det(w, grid, opt);
    const ScalarField a = w.cwiseAbs();
    // The h^2 quadrature weights cancel.
    const double num = a.cwiseProduct(ma).sum();
    const double den = a.array().pow(kDim + 1).sum();
    return num / den;
}

EigenPair solve_eigen(const Grid& grid, const SpectralConfig& cfg, const ScalarField* initial) {
    cfg.validate();
    ScalarField w = initial ? normalized_start(*initial, grid) : psi_field(grid, cfg.inner);
    EigenPair out;
    ScalarField w_hat;
    double lambda_prev = 0.0;
    for (int k = 0; k < cfg.max_iterations; ++k) {
        const ScalarField* warm = w_hat.size() ? &w_hat : nullptr;
        w_hat = solve_dirichlet(grid, abs_pow(w, kDim), cfg.inner, warm);
        const double m = sup(w_hat);
        ScalarField w_next = w_hat / m;
        EigenIterate it;
        it.lambda_homogeneity = std::pow(m, -kDim);
        it.lambda_rayleigh = rayleigh_quotient(w_next, grid, cfg.inner.ma);
        it.field_change = sup(w_next - w);
        out.history.push_back(it);
        if (cfg.inner.verbosity > 0) {
            std::cerr << "eigen iteration " << k << " lambda " << it.lambda_rayleigh << " (homogeneity "
                      << it.lambda_homogeneity << ") dw " << it.field_change << "\n";
        }
        w = std::move(w_next);
        const bool lambda_done = std::abs(it.lambda_rayleigh - lambda_prev) <= cfg.tol_lambda * it.lambda_rayleigh;
        lambda_prev = it.lambda_rayleigh;
        if (k > 0 && lambda_done && it.field_change <= cfg.tol_field) {
            out.lambda = it.lambda_rayleigh;
            out.w = std::move(w);
            return out;
        }
    }
    throw NoConvergence("solve_eigen: no convergence", out.history.back().field_change, cfg.max_iterations);
}

RenormalizationFactors renormalization_factors(double v_hat_sup, double p) {
    RenormalizationFactors f;
    f.b = 1.0 / v_hat_sup;
    f.a = std::pow(f.b, p / (p + kDim));
    f.sigma = std::pow(f.a, kDim);
    return f;
}

std::pair<ScalarField, ScalarField> system_residuals(const Grid& grid, double p, double sigma, const ScalarField& u,
                                                     const ScalarField& v, const MaOptions& opt) {
    const double q = static_cast<double>(kDim * kDim) / p;
    return {ma_det(u, grid, opt) - sigma * abs_pow(v, p), ma_det(v, grid, opt) - sigma * abs_pow(u, q)};
}

SystemSolution solve_system(const Grid& grid, double p, const SpectralConfig& cfg, const ScalarField* initial_v,
                            const ScalarField* warm_u) {
    if (!(p > 0.0) || !std::isfinite(p)) throw InvalidInput("invalid exponent: p must be positive");
    cfg.validate();
    const double q = static_cast<double>(kDim * kDim) / p;

    ScalarField v = initial_v ? normalized_start(*initial_v, grid) : psi_field(grid, cfg.inner);
    SystemSolution out;
    out.p = p;
    ScalarField u_hat, v_hat;
    if (warm_u) u_hat = *warm_u;
    double sigma_prev = 0.0;
    for (int k = 0; k < cfg.max_iterations; ++k) {
        // Warm starts are rescaled guesses; the inner solver only needs them nearby.
        u_hat = solve_dirichlet(grid, abs_pow(v, p), cfg.inner, u_hat.size() ? &u_hat : nullptr);
        v_hat = solve_dirichlet(grid, abs_pow(u_hat, q), cfg.inner, v_hat.size() ? &v_hat : nullptr);
        const RenormalizationFactors fac = renormalization_factors(sup(v_hat), p);
        ScalarField v_next = fac.b * v_hat;
        SystemIterate it{fac.sigma, sup(v_next - v)};
        out.history.push_back(it);
        if (cfg.inner.verbosity > 0) {
            std::cerr << "system iteration " << k << " sigma " << fac.sigma << " dv " << it.field_change << "\n";
        }
        out.u = fac.a * u_hat;
        v = std::move(v_next);
        const bool sigma_done = std::abs(fac.sigma - sigma_prev) <= cfg.tol_lambda * fac.sigma;
        sigma_prev = fac.sigma;
        if (k > 0 && sigma_done && it.field_change <= cfg.tol_field) {
            out.sigma = fac.sigma;
            out.v = std::move(v);
            auto [ru, rv] = system_residuals(grid, p, out.sigma, out.u, out.v, cfg.inner.ma);
            out.residual_u = sup(ru);
            out.residual_v = sup(rv);
            const double bound = cfg.tol_residual * (1.0 + out.sigma);
            if (out.residual_u > bound || out.residual_v > bound) {
                throw NoConvergence("solve_system: converged iterates violate the residual bound",
                                    std::max(out.residual_u, out.residual_v), k + 1);
            }
            return out;
        }
    }
    throw NoConvergence("solve_system: no convergence", out.history.back().field_change, cfg.max_iterations);
}

ScaledPair scaling_map(const SystemSolution& sol, double tau) {
    if (!(tau > 0.0)) throw InvalidInput("scaling_map: tau must be positive");
    return {std::pow(tau, sol.p / kDim) * sol.u, tau * sol.v};
}

std::vector<SweepEntry> sweep_p(const Grid& grid, const std::vector<double>& p_list, const SpectralConfig& cfg) {
    std::vector<SweepEntry> out;
    std::optional<SystemSolution> previous;
    for (double p : p_list) {
        SweepEntry e;
        e.p = p;
        try {
            e.solution = previous ? solve_system(grid, p, cfg, &previous->v, &previous->u) : solve_system(grid, p, cfg);
        } catch (const std::exception& ex) {
            e.error = ex.what();
        }
        if (e.solution) previous = e.solution;
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<SweepEntry> sweep_p_parallel(const Grid& grid, const std::vector<double>& p_list,
                                         const SpectralConfig& cfg, int jobs) {
    std::vector<SweepEntry> out(p_list.size());
    const std::size_t width = static_cast<std::size_t>(std::max(jobs, 1));
    for (std::size_t start = 0; start < p_list.size(); start += width) {
        std::vector<std::future<void>> running;
        for (std::size_t i = start; i < std::min(p_list.size(), start + width); ++i) {
            running.push_back(std::async(std::launch::async, [&, i] {
                out[i].p = p_list[i];
                try {
                    out[i].solution = solve_system(grid, p_list[i], cfg);
                } catch (const std::exception& ex) {
                    out[i].error = ex.what();
                }
            }));
        }
        for (auto& f : running) f.get();
    }
    return out;
}

}  // namespace masys

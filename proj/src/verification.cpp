#include "masys/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "masys/errors.hpp"

namespace masys {

namespace {

constexpr double kZeroField = 1e-14;
constexpr std::size_t kMaxLocations = 5;

double sup(const ScalarField& x) { return x.lpNorm<Eigen::Infinity>(); }

void require_trial(const ScalarField& w, const Grid& grid, const char* name) {
    if (w.size() != grid.interior_count()) throw InvalidInput(std::string(name) + ": size does not match the grid");
    const double m = sup(w);
    if (!(m >= kZeroField)) throw InvalidInput(std::string(name) + ": zero field");
    if (w.maxCoeff() > 1e-12 * m) throw InvalidInput(std::string(name) + ": field must be <= 0");
    if (!is_discretely_convex(w, grid, 1e-8 * m)) throw InvalidInput(std::string(name) + ": nonconvex field");
}

// Worst nodes by `violation` (larger is worse), restricted to positive values.
std::vector<NodeLocation> worst_nodes(const Grid& grid, const ScalarField& violation) {
    std::vector<int> order(static_cast<std::size_t>(violation.size()));
    for (int i = 0; i < violation.size(); ++i) order[static_cast<std::size_t>(i)] = i;
    const std::size_t keep = std::min(kMaxLocations, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](int a, int b) { return violation[a] > violation[b]; });
    std::vector<NodeLocation> out;
    for (std::size_t i = 0; i < keep; ++i) {
        const int n = order[i];
        if (!(violation[n] > 0.0)) break;
        const Point x = grid.position(n);
        out.push_back({n, x.x, x.y, violation[n]});
    }
    return out;
}

}  // namespace

GridInfo grid_info(const Grid& grid) {
    return {grid.nx(), grid.ny(), grid.h(), grid.interior_count(), grid.stencil().pair_count(),
            grid.domain().describe()};
}

CheckReport check_nibp(const ScalarField& u, const ScalarField& v, const Grid& grid, double tol, const MaOptions& opt) {
    require_trial(u, grid, "check_nibp u");
    require_trial(v, grid, "check_nibp v");
    CheckReport r;
    r.name = "nibp";
    r.grid = grid_info(grid);
    r.tolerance = tol;
    const double h2 = grid.h() * grid.h();
    const ScalarField mu = ma_det(u, grid, opt).cwiseMax(0.0);
    const ScalarField mv = ma_det(v, grid, opt).cwiseMax(0.0);
    const double n = kDim;
    const ScalarField left = u.cwiseAbs().cwiseProduct(mv);
    const ScalarField right =
        (v.cwiseAbs().array() * mu.array().pow(1.0 / n) * mv.array().pow((n - 1.0) / n)).matrix();
    r.lhs = left.sum() * h2;
    r.rhs = right.sum() * h2;
    r.margin = r.lhs - r.rhs;
    r.measured["relative_margin"] = r.margin / (1.0 + std::abs(r.lhs));
    r.passed = r.margin >= -tol * (1.0 + std::abs(r.lhs));
    if (!r.passed) r.locations = worst_nodes(grid, right - left);
    return r;
}

CheckReport check_amgm(const ScalarField& u, const ScalarField& v, const Grid& grid, double tol, const MaOptions& opt) {
    const ScalarField s = u + v;
    if (!is_discretely_convex(s, grid, 1e-8 * std::max(1.0, sup(s)))) throw InvalidInput("check_amgm: u+v is not convex");
    CheckReport r;
    r.name = "amgm";
    r.grid = grid_info(grid);
    r.tolerance = tol;
    const ScalarField left = (kDim * ma_det(s, grid, opt).cwiseMax(0.0).array().pow(1.0 / kDim)).matrix();
    const ScalarField right = laplacian(s, grid);
    ScalarField slack(s.size());
    ScalarField violation(s.size());
    bool ok = true;
    int worst = 0;
    for (int i = 0; i < s.size(); ++i) {
        slack[i] = right[i] - left[i];
        violation[i] = -slack[i] - tol * (1.0 + std::abs(left[i]));
        ok = ok && violation[i] <= 0.0;
        if (slack[i] < slack[worst]) worst = i;
    }
    r.lhs = left[worst];
    r.rhs = right[worst];
    r.margin = slack[worst];
    r.measured["max_margin"] = slack.maxCoeff();
    r.passed = ok;
    if (!ok) r.locations = worst_nodes(grid, violation);
    return r;
}

CheckReport check_minkowski_det(const Eigen::Matrix2d& a, const Eigen::Matrix2d& b, double tol, double equality_tol) {
    auto require_spd = [](const Eigen::Matrix2d& m, const char* name) {
        if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
            throw InvalidInput(std::string("check_minkowski_det: ") + name + " is not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m, Eigen::EigenvaluesOnly);
        if (!(es.eigenvalues().minCoeff() > 1e-12))
            throw InvalidInput(std::string("check_minkowski_det: ") + name + " is not positive definite");
    };
    require_spd(a, "A");
    require_spd(b, "B");
    const double n = kDim;
    CheckReport r;
    r.name = "minkowski_det";
    r.tolerance = tol;
    r.lhs = std::pow((a + b).determinant(), 1.0 / n);
    r.rhs = std::pow(a.determinant(), 1.0 / n) + std::pow(b.determinant(), 1.0 / n);
    r.margin = r.lhs - r.rhs;
    const double c = (a.array() * b.array()).sum() / b.squaredNorm();
    const double fit = (a - c * b).norm() / a.norm();
    r.measured["fitted_c"] = c;
    r.measured["fit_residual"] = fit;
    r.measured["equality"] = (c > 0.0 && fit <= equality_tol) ? 1.0 : 0.0;
    r.passed = r.margin >= -tol * (1.0 + std::abs(r.lhs));
    if (!r.passed) r.note = "inequality violated";
    return r;
}

CheckReport check_minkowski_random(int count, std::uint64_t seed) {
    if (count < 1) throw InvalidInput("check_minkowski_random: count must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> shift(1e-3, 1.0);
    auto random_spd = [&] {
        Eigen::Matrix2d g;
        g << gauss(rng), gauss(rng), gauss(rng), gauss(rng);
        return Eigen::Matrix2d(g.transpose() * g + shift(rng) * Eigen::Matrix2d::Identity());
    };
    CheckReport r;
    r.name = "minkowski_det_random";
    r.passed = true;
    r.margin = std::numeric_limits<double>::infinity();
    int failures = 0;
    for (int i = 0; i < count; ++i) {
        const Eigen::Matrix2d a = random_spd(), b = random_spd();
        const CheckReport one = check_minkowski_det(a, b);
        r.tolerance = one.tolerance;
        if (one.margin < r.margin) {
            r.margin = one.margin;
            r.lhs = one.lhs;
            r.rhs = one.rhs;
        }
        if (!one.passed) {
            r.passed = false;
            if (r.locations.size() < kMaxLocations) r.locations.push_back({i, 0.0, 0.0, one.margin});
            ++failures;
        }
    }
    r.measured["pairs"] = count;
    r.measured["failures"] = failures;
    return r;
}

CheckReport check_uvn_identity(const ScalarField& u, const ScalarField& v, int n, double tol) {
    if (u.size() != v.size()) throw InvalidInput("check_uvn_identity: field sizes differ");
    if (n < 1) throw InvalidInput("check_uvn_identity: n must be >= 1");
    CheckReport r;
    r.name = "uvn_identity";
    r.tolerance = tol;
    double worst_identity = 0.0;
    double min_lhs = std::numeric_limits<double>::infinity();
    double max_lhs = -std::numeric_limits<double>::infinity();
    bool ok = true;
    for (int i = 0; i < u.size(); ++i) {
        const double a = std::abs(u[i]), b = std::abs(v[i]);
        const double scale = std::pow(a, n + 1) + std::pow(b, n + 1);
        const double left = scale - (a * std::pow(b, n) + b * std::pow(a, n));
        double sum = 0.0;
        for (int k = 1; k <= n; ++k) sum += std::pow(a, n - k) * std::pow(b, k - 1);
        const double right = (a - b) * (a - b) * sum;
        const double defect = scale > 0.0 ? std::abs(left - right) / scale : std::abs(left - right);
        worst_identity = std::max(worst_identity, defect);
        min_lhs = std::min(min_lhs, left);
        max_lhs = std::max(max_lhs, left);
        if (defect > tol || left < -tol * std::max(scale, 1e-300)) {
            ok = false;
            if (r.locations.size() < kMaxLocations) r.locations.push_back({i, 0.0, 0.0, defect});
        }
    }
    r.lhs = max_lhs;
    r.rhs = min_lhs;
    r.margin = min_lhs;
    r.measured["max_identity_defect"] = worst_identity;
    r.measured["max_lhs"] = max_lhs;
    r.measured["min_lhs"] = min_lhs;
    r.passed = ok;
    return r;
}

CheckReport cd1_invariant(const SystemSolution& sol, const std::vector<double>& s_list, double tol) {
    if (!(sol.sigma > 0.0) || !(sol.p > 0.0)) throw InvalidInput("cd1_invariant: needs a converged solution");
    if (s_list.empty()) throw InvalidInput("cd1_invariant: empty scale list");
    const double n = kDim, p = sol.p;
    const double constant = std::pow(sol.sigma, 1.0 + p / n);
    CheckReport r;
    r.name = "cd1_invariant";
    r.tolerance = tol;
    r.rhs = constant;
    r.measured["C_estimate"] = constant;
    double worst = 0.0;
    for (double s : s_list) {
        if (!(s > 0.0)) throw InvalidInput("cd1_invariant: scales must be positive");
        const double gamma = std::pow(s, n) * sol.sigma;
        const double mu = std::pow(s, -n * n / p) * sol.sigma;
        const double product = gamma * std::pow(mu, p / n);
        const double rel = std::abs(product - constant) / constant;
        if (rel > worst) {
            worst = rel;
            r.lhs = product;
        }
    }
    if (worst == 0.0) r.lhs = constant;
    r.margin = -worst;
    r.measured["max_relative_defect"] = worst;
    r.passed = worst <= tol;
    return r;
}

CheckReport check_scaling_identity(const SystemSolution& sol, const Grid& grid, double tau, double tol,
                                   const MaOptions& opt) {
    const ScaledPair scaled = scaling_map(sol, tau);
    const auto [r1, r2] = system_residuals(grid, sol.p, sol.sigma, sol.u, sol.v, opt);
    const auto [s1, s2] = system_residuals(grid, sol.p, sol.sigma, scaled.u, scaled.v, opt);
    const double f1 = std::pow(tau, sol.p);
    const double f2 = std::pow(tau, static_cast<double>(kDim * kDim) / sol.p * (sol.p / kDim));
    // Defects are measured against the magnitude of the terms whose
    // difference forms each residual.
    const double q = static_cast<double>(kDim * kDim) / sol.p;
    const double scale1 = std::max(sup(ma_det(sol.u, grid, opt)), sol.sigma * std::pow(sup(sol.v), sol.p));
    const double scale2 = std::max(sup(ma_det(sol.v, grid, opt)), sol.sigma * std::pow(sup(sol.u), q));
    ScalarField defect1 = (s1 - f1 * r1).cwiseAbs() / (f1 * scale1);
    ScalarField defect2 = (s2 - f2 * r2).cwiseAbs() / (f2 * scale2);
    CheckReport r;
    r.name = "scaling_identity";
    r.grid = grid_info(grid);
    r.tolerance = tol;
    r.measured["tau"] = tau;
    r.measured["factor_equation_1"] = f1;
    r.measured["factor_equation_2"] = f2;
    r.measured["max_defect_equation_1"] = defect1.maxCoeff();
    r.measured["max_defect_equation_2"] = defect2.maxCoeff();
    r.measured["sup_v_scaled"] = sup(scaled.v);
    r.lhs = std::max(sup(s1), sup(s2));
    r.rhs = std::max(f1 * sup(r1), f2 * sup(r2));
    const double worst = std::max(defect1.maxCoeff(), defect2.maxCoeff());
    r.margin = -worst;
    r.passed = worst <= tol;
    if (!r.passed) r.locations = worst_nodes(grid, (defect1.cwiseMax(defect2).array() - tol).matrix());
    return r;
}

CheckReport sup_bound_report(const SystemSolution& sol, const ConvexDomain& domain, SupBoundWindow window,
                             SupBoundWindow ratio_window) {
    if (!(sol.sigma > 0.0) || sol.v.size() == 0) throw InvalidInput("sup_bound_report: needs a converged solution");
    CheckReport r;
    r.name = "sup_bound";
    const double area = domain.area();
    const double scaled_sigma = sol.sigma * area * area;
    const double ratio = std::pow(sup(sol.u), kDim / sol.p) / sup(sol.v);
    r.lhs = scaled_sigma;
    r.rhs = ratio;
    r.measured["sigma"] = sol.sigma;
    r.measured["area"] = area;
    r.measured["sigma_area_squared"] = scaled_sigma;
    r.measured["norm_ratio"] = ratio;
    r.measured["window_lo"] = window.lo;
    r.measured["window_hi"] = window.hi;
    r.measured["ratio_window_lo"] = ratio_window.lo;
    r.measured["ratio_window_hi"] = ratio_window.hi;
    const bool sigma_ok = scaled_sigma >= window.lo && scaled_sigma <= window.hi;
    const bool ratio_ok = ratio >= ratio_window.lo && ratio <= ratio_window.hi;
    r.margin = std::min({std::log10(scaled_sigma / window.lo), std::log10(window.hi / scaled_sigma),
                         std::log10(ratio / ratio_window.lo), std::log10(ratio_window.hi / ratio)});
    r.passed = sigma_ok && ratio_ok;
    if (!r.passed) r.note = "outside configured window";
    return r;
}

CheckReport sup_bound_family(const std::vector<SupBoundSample>& samples, double spread) {
    if (samples.empty()) throw InvalidInput("sup_bound_family: no samples");
    CheckReport r;
    r.name = "sup_bound_family";
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& s : samples) {
        const double v = s.sigma * s.area * s.area;
        r.measured["sigma_area_squared[" + s.label + "]"] = v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    r.lhs = hi / lo;
    r.rhs = spread;
    r.margin = spread - hi / lo;
    r.tolerance = spread;
    r.passed = hi / lo <= spread;
    if (!r.passed) r.note = "outside configured window";
    return r;
}

CheckReport distance_bound_report(const ScalarField& u, const ConvexDomain& domain, const Grid& grid,
                                  double ratio_threshold) {
    if (u.size() != grid.interior_count()) throw InvalidInput("distance_bound_report: size does not match the grid");
    if (!(sup(u) >= kZeroField)) throw InvalidInput("zero field");
    CheckReport r;
    r.name = "distance_bound";
    r.grid = grid_info(grid);
    r.tolerance = ratio_threshold;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    int lo_node = 0, hi_node = 0;
    for (int n = 0; n < grid.interior_count(); ++n) {
        const double ratio = std::abs(u[n]) / domain.boundary_distance(grid.position(n));
        if (ratio < lo) {
            lo = ratio;
            lo_node = n;
        }
        if (ratio > hi) {
            hi = ratio;
            hi_node = n;
        }
    }
    r.lhs = lo;
    r.rhs = hi;
    r.measured["min_ratio"] = lo;
    r.measured["max_ratio"] = hi;
    r.measured["spread"] = hi / lo;
    r.margin = ratio_threshold - hi / lo;
    r.passed = lo > 0.0 && std::isfinite(hi) && hi / lo <= ratio_threshold;
    if (!r.passed) {
        for (int n : {lo_node, hi_node}) {
            const Point x = grid.position(n);
            r.locations.push_back({n, x.x, x.y, std::abs(u[n]) / domain.boundary_distance(x)});
        }
    }
    return r;
}

ScalarField random_convex_field(const Grid& grid, std::uint64_t seed, const SolverConfig& config) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(-0.7, 0.7), phase(0.0, 2.0 * std::numbers::pi),
        wave(-3.0, 3.0);
    const double scale = 2.0 * std::numbers::pi / grid.domain().diameter();
    struct Mode {
        double a, kx, ky, phi;
    };
    std::vector<Mode> modes;
    for (int j = 0; j < 4; ++j) modes.push_back({amp(rng), wave(rng) * scale, wave(rng) * scale, phase(rng)});
    const ScalarField rhs = sample(grid, [&](Point x) {
        double s = 0.0;
        for (const auto& m : modes) s += m.a * std::cos(m.kx * x.x + m.ky * x.y + m.phi);
        return std::exp(s);
    });
    ScalarField w = solve_dirichlet(grid, rhs, config);
    return w / sup(w);
}

CheckReport uniqueness_experiment(const Grid& grid, double p, const SpectralConfig& config,
                                  const UniquenessOptions& options, std::vector<SystemSolution>* solutions) {
    if (options.seed_count < 2) throw InvalidInput("need at least two seeds");
    if (std::abs(p - kDim) > options.p_window) {
        throw InvalidInput("uniqueness_experiment: |p - n| exceeds the tested window " +
                           std::to_string(options.p_window));
    }
    CheckReport r;
    r.name = "uniqueness";
    r.grid = grid_info(grid);
    r.tolerance = options.sigma_tol;
    r.measured["p"] = p;
    std::vector<SystemSolution> sols;
    for (int s = 0; s < options.seed_count; ++s) {
        const ScalarField start = random_convex_field(grid, options.base_seed + static_cast<std::uint64_t>(s), config.inner);
        sols.push_back(solve_system(grid, p, config, &start));
        r.measured["sigma[" + std::to_string(s) + "]"] = sols.back().sigma;
        r.measured["iterations[" + std::to_string(s) + "]"] = static_cast<double>(sols.back().history.size());
    }
    double smin = std::numeric_limits<double>::infinity(), smax = 0.0, field_spread = 0.0;
    for (std::size_t i = 0; i < sols.size(); ++i) {
        smin = std::min(smin, sols[i].sigma);
        smax = std::max(smax, sols[i].sigma);
        for (std::size_t j = i + 1; j < sols.size(); ++j) {
            field_spread = std::max({field_spread, sup(sols[i].u - sols[j].u), sup(sols[i].v - sols[j].v)});
        }
    }
    const double sigma_spread = (smax - smin) / smax;
    r.lhs = sigma_spread;
    r.rhs = field_spread;
    r.measured["sigma_relative_spread"] = sigma_spread;
    r.measured["field_spread"] = field_spread;
    r.measured["field_tolerance"] = options.field_tol;
    r.margin = std::min(options.sigma_tol - sigma_spread, options.field_tol - field_spread);
    r.passed = sigma_spread <= options.sigma_tol && field_spread <= options.field_tol;
    if (!r.passed) r.note = "solutions from different starts disagree";
    if (solutions) solutions->insert(solutions->end(), sols.begin(), sols.end());
    return r;
}

}  // namespace masys

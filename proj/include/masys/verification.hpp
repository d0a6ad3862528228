#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "masys/spectral.hpp"

namespace masys {

struct GridInfo {
    int nx = 0;
    int ny = 0;
    double h = 0.0;
    int interior = 0;
    int stencil_pairs = 0;
    std::string domain;
};

GridInfo grid_info(const Grid& grid);

struct NodeLocation {
    int node = -1;
    double x = 0.0;
    double y = 0.0;
    double value = 0.0;  // per-check violation measure at the node
};

/// Outcome of one numerical check. `margin` is signed so that margin >= 0
/// means the inequality holds without slack; `passed` also accounts for the
/// tolerance. On failure `locations` names the worst nodes.
struct CheckReport {
    std::string name;
    bool passed = false;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    double tolerance = 0.0;
    std::map<std::string, double> measured;
    std::vector<NodeLocation> locations;
    GridInfo grid;
    std::string note;
};

/// Slack for the nonlinear integration-by-parts check, relative to 1 + |lhs|.
/// The node-sum integrals inherit the angular consistency error of the
/// 2-pair stencil, which shows up as a defect of a few 1e-4 on coupled pairs.
inline constexpr double kNibpTolerance = 1e-3;

/// int |u| MA(v) >= int |v| MA(u)^(1/n) MA(v)^((n-1)/n), node sums times h^2.
CheckReport check_nibp(const ScalarField& u, const ScalarField& v, const Grid& grid,
                       double tol = kNibpTolerance, const MaOptions& opt = {});

/// n MA(u+v)^(1/n) <= laplacian(u+v) at every node.
CheckReport check_amgm(const ScalarField& u, const ScalarField& v, const Grid& grid, double tol = 1e-8,
                       const MaOptions& opt = {});

/// det(A+B)^(1/n) >= det(A)^(1/n) + det(B)^(1/n) for SPD A, B; flags the
/// equality case A = cB when the fitted residual ||A - cB||_F / ||A||_F is
/// at most `equality_tol`.
CheckReport check_minkowski_det(const Eigen::Matrix2d& a, const Eigen::Matrix2d& b, double tol = 1e-12,
                                double equality_tol = 1e-6);

/// check_minkowski_det over `count` random SPD pairs G^T G + delta I,
/// aggregated into one report (margin = smallest margin seen).
CheckReport check_minkowski_random(int count, std::uint64_t seed);

/// |u|^(n+1) + |v|^(n+1) - (|u||v|^n + |v||u|^n)
///   = (|u| - |v|)^2 sum_{i=1..n} |u|^(n-i) |v|^(i-1) >= 0, nodewise.
CheckReport check_uvn_identity(const ScalarField& u, const ScalarField& v, int n = kDim, double tol = 1e-12);

/// Rescaling u -> s u changes (gamma, mu) to (s^n sigma, s^(-n^2/p) sigma);
/// gamma mu^(p/n) must stay sigma^(1 + p/n) for every s.
CheckReport cd1_invariant(const SystemSolution& sol, const std::vector<double>& s_list, double tol = 1e-12);

/// Nodewise scaling identities for (tau^(p/n) u, tau v):
/// residual_1' = tau^p residual_1 and residual_2' = tau^n residual_2.
CheckReport check_scaling_identity(const SystemSolution& sol, const Grid& grid, double tau, double tol = 1e-12,
                                   const MaOptions& opt = {});

struct SupBoundWindow {
    double lo = 1e-3;
    double hi = 1e3;
};

/// sigma |Omega|^2 and ||u||^(n/p) / ||v|| must both lie inside `window`.
CheckReport sup_bound_report(const SystemSolution& sol, const ConvexDomain& domain, SupBoundWindow window = {},
                             SupBoundWindow ratio_window = {});

struct SupBoundSample {
    std::string label;
    double p = 0.0;
    double sigma = 0.0;
    double area = 0.0;
};

/// Across a domain family with fixed p: max/min of sigma |Omega|^2 <= spread.
CheckReport sup_bound_family(const std::vector<SupBoundSample>& samples, double spread = 100.0);

/// r(x) = |u(x)| / dist(x, boundary) over interior nodes; passes iff
/// min r > 0, max r finite and max/min <= ratio_threshold.
CheckReport distance_bound_report(const ScalarField& u, const ConvexDomain& domain, const Grid& grid,
                                  double ratio_threshold = 1e3);

/// Random convex starting field: the normalized solution of a Dirichlet
/// problem with a random smooth positive right-hand side.
ScalarField random_convex_field(const Grid& grid, std::uint64_t seed, const SolverConfig& config = {});

struct UniquenessOptions {
    int seed_count = 3;
    std::uint64_t base_seed = 0;
    double p_window = 0.25;  // |p - n| admitted
    double sigma_tol = 1e-5;  // relative spread
    double field_tol = 1e-4;  // sup-norm spread of u and v
};

/// Solves the system from several random initializations and compares.
/// The individual solutions are appended to `solutions` when given.
CheckReport uniqueness_experiment(const Grid& grid, double p, const SpectralConfig& config,
                                  const UniquenessOptions& options = {},
                                  std::vector<SystemSolution>* solutions = nullptr);

}  // namespace masys

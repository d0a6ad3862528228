#pragma once

#include <algorithm>
#include <optional>

#include <Eigen/Core>

#include "masys/geometry.hpp"

namespace masys {

/// Spatial dimension of the grid solver. Exponent algebra elsewhere is
/// written in terms of this constant.
inline constexpr int kDim = 2;

/// Values at interior grid nodes, in Grid node order. The boundary carries
/// the implicit value 0.
using ScalarField = Eigen::VectorXd;

struct MaOptions {
    /// Weight on the negative parts of the directional differences.
    double penalty = 1.0;
};

/// One Shortley-Weller directional second difference, split into its linear
/// coefficients: value = plus_coef*u[plus] + minus_coef*u[minus] - diag*u[node],
/// with u[-1] read as the zero boundary value.
struct DirectionalDifference {
    double value = 0.0;
    double diag = 0.0;
    double plus_coef = 0.0;
    double minus_coef = 0.0;
    int plus = -1;
    int minus = -1;
};

/// Stencil direction d (index into grid.stencil()) at `node`.
DirectionalDifference directional_difference(const ScalarField& u, const Grid& grid, int node, int d);

/// Second difference of u along +-e at `node`. Uses the grid's precomputed
/// rays when e is a stencil direction, otherwise intersects the domain.
double second_difference(const ScalarField& u, const Grid& grid, int node, LatticeDirection e);

/// Value of one stencil pair: (D1)^+ (D2)^+ - penalty ((D1)^- + (D2)^-).
inline double pair_value(double d1, double d2, double penalty) {
    const double pos = std::max(d1, 0.0) * std::max(d2, 0.0);
    return pos - penalty * (std::max(-d1, 0.0) + std::max(-d2, 0.0));
}

/// Discrete Monge-Ampere operator at one node: minimum of pair_value over the
/// stencil pairs. `active` receives the minimizing pair (lowest index on ties).
double ma_det_at(const ScalarField& u, const Grid& grid, int node, const MaOptions& opt = {}, int* active = nullptr);

ScalarField ma_det(const ScalarField& u, const Grid& grid, const MaOptions& opt = {});

/// Sum of the two axis second differences.
ScalarField laplacian(const ScalarField& u, const Grid& grid);

/// Central-difference Hessian; nullopt unless all 8 lattice neighbours are interior.
std::optional<Eigen::Matrix2d> central_hessian(const ScalarField& u, const Grid& grid, int node);

/// True iff every stencil second difference is >= -tol.
bool is_discretely_convex(const ScalarField& u, const Grid& grid, double tol = 1e-8);

/// Smallest stencil second difference over all nodes and directions.
double min_second_difference(const ScalarField& u, const Grid& grid);

/// Field from a function of position evaluated at the interior nodes.
template <class F>
ScalarField sample(const Grid& grid, F&& f) {
    ScalarField out(grid.interior_count());
    for (int n = 0; n < grid.interior_count(); ++n) out[n] = f(grid.position(n));
    return out;
}

}  // namespace masys

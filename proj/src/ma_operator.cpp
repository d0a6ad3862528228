#include "masys/ma_operator.hpp"

#include <algorithm>
#include <limits>

namespace masys {

namespace {

double neighbor_value(const ScalarField& u, int k) { return k >= 0 ? u[k] : 0.0; }

DirectionalDifference shortley_weller(const ScalarField& u, int node, int plus, double theta_plus, int minus,
                                      double theta_minus, double step) {
    DirectionalDifference dd;
    const double s2 = step * step;
    dd.plus = plus;
    dd.minus = minus;
    dd.diag = 2.0 / (s2 * theta_plus * theta_minus);
    dd.plus_coef = 2.0 / (s2 * theta_plus * (theta_plus + theta_minus));
    dd.minus_coef = 2.0 / (s2 * theta_minus * (theta_plus + theta_minus));
    dd.value = dd.plus_coef * neighbor_value(u, plus) + dd.minus_coef * neighbor_value(u, minus) - dd.diag * u[node];
    return dd;
}

}  // namespace

DirectionalDifference directional_difference(const ScalarField& u, const Grid& grid, int node, int d) {
    const Ray& fwd = grid.ray(node, d, +1);
    const Ray& bwd = grid.ray(node, d, -1);
    const double step = grid.stencil().direction(d).length() * grid.h();
    return shortley_weller(u, node, fwd.neighbor, fwd.theta, bwd.neighbor, bwd.theta, step);
}

double second_difference(const ScalarField& u, const Grid& grid, int node, LatticeDirection e) {
    const auto& st = grid.stencil();
    for (int d = 0; d < st.direction_count(); ++d) {
        const LatticeDirection s = st.direction(d);
        if (s == e || (s.dx == -e.dx && s.dy == -e.dy)) return directional_difference(u, grid, node, d).value;
    }
    const auto [i, j] = grid.lattice_coords(node);
    const Point x = grid.position(node);
    auto ray = [&](int sign) -> Ray {
        const int k = grid.index(i + sign * e.dx, j + sign * e.dy);
        if (k >= 0) return {k, 1.0};
        return {-1, boundary_fraction(grid.domain(), x, {sign * e.dx, sign * e.dy}, grid.h())};
    };
    const Ray fwd = ray(+1), bwd = ray(-1);
    return shortley_weller(u, node, fwd.neighbor, fwd.theta, bwd.neighbor, bwd.theta, e.length() * grid.h()).value;
}

double ma_det_at(const ScalarField& u, const Grid& grid, int node, const MaOptions& opt, int* active) {
    double best = std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (int k = 0; k < grid.stencil().pair_count(); ++k) {
        const double d1 = directional_difference(u, grid, node, 2 * k).value;
        const double d2 = directional_difference(u, grid, node, 2 * k + 1).value;
        const double v = pair_value(d1, d2, opt.penalty);
        if (v < best) {
            best = v;
            best_k = k;
        }
    }
    if (active) *active = best_k;
    return best;
}

ScalarField ma_det(const ScalarField& u, const Grid& grid, const MaOptions& opt) {
    ScalarField out(grid.interior_count());
    for (int n = 0; n < grid.interior_count(); ++n) out[n] = ma_det_at(u, grid, n, opt);
    return out;
}

ScalarField laplacian(const ScalarField& u, const Grid& grid) {
    ScalarField out(grid.interior_count());
    for (int n = 0; n < grid.interior_count(); ++n) {
        out[n] = directional_difference(u, grid, n, 0).value + directional_difference(u, grid, n, 1).value;
    }
    return out;
}

std::optional<Eigen::Matrix2d> central_hessian(const ScalarField& u, const Grid& grid, int node) {
    const auto [i, j] = grid.lattice_coords(node);
    int idx[3][3];
    for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
            idx[di + 1][dj + 1] = grid.index(i + di, j + dj);
            if (idx[di + 1][dj + 1] < 0) return std::nullopt;
        }
    }
    auto at = [&](int di, int dj) { return u[idx[di + 1][dj + 1]]; };
    const double h2 = grid.h() * grid.h();
    Eigen::Matrix2d hess;
    hess(0, 0) = (at(1, 0) - 2.0 * at(0, 0) + at(-1, 0)) / h2;
    hess(1, 1) = (at(0, 1) - 2.0 * at(0, 0) + at(0, -1)) / h2;
    hess(0, 1) = hess(1, 0) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h2);
    return hess;
}

double min_second_difference(const ScalarField& u, const Grid& grid) {
    double m = std::numeric_limits<double>::infinity();
    for (int n = 0; n < grid.interior_count(); ++n)
        for (int d = 0; d < grid.stencil().direction_count(); ++d)
            m = std::min(m, directional_difference(u, grid, n, d).value);
    return m;
}

bool is_discretely_convex(const ScalarField& u, const Grid& grid, double tol) {
    return min_second_difference(u, grid) >= -tol;
}

}  // namespace masys

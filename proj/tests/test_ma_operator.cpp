#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "masys/ma_operator.hpp"

using namespace masys;

namespace {

// Nodes whose rays in every stencil direction land on interior nodes.
std::vector<int> deep_nodes(const Grid& g) {
    std::vector<int> out;
    for (int n = 0; n < g.interior_count(); ++n) {
        bool deep = true;
        for (int d = 0; d < g.stencil().direction_count() && deep; ++d)
            deep = g.ray(n, d, 1).neighbor >= 0 && g.ray(n, d, -1).neighbor >= 0;
        if (deep) out.push_back(n);
    }
    return out;
}

const ConvexDomain kBig = ConvexDomain::rectangle({-2, -2}, {2, 2});

}  // namespace

TEST_CASE("second_difference examples") {
    const Grid g = build_grid(kBig, 0.25);
    const ScalarField x1sq = sample(g, [](Point p) { return p.x * p.x; });
    const ScalarField c = ScalarField::Constant(g.interior_count(), 3.5);
    for (int n : deep_nodes(g)) {
        CHECK(second_difference(x1sq, g, n, {1, 0}) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(std::abs(second_difference(c, g, n, {1, 0})) <= 1e-12);
    }

    // homogeneous-data differencing: the right ray ends on the boundary x = 1
    const Grid sq = build_grid(ConvexDomain::square(1.0), 0.25);
    const ScalarField lin = sample(sq, [](Point p) { return p.x; });
    const int node = sq.index(3, 2);
    REQUIRE(node >= 0);
    CHECK(sq.ray(node, 0, 1).neighbor == -1);
    CHECK(sq.ray(node, 0, 1).theta == doctest::Approx(1.0));
    CHECK(second_difference(lin, sq, node, {1, 0}) == doctest::Approx(-16.0));
}

TEST_CASE("ma_det examples") {
    const Grid disk = build_grid(ConvexDomain::disk({0, 0}, 1.0), 1.0 / 16);
    const ScalarField q = sample(disk, [](Point p) { return 0.5 * (p.x * p.x + p.y * p.y - 1.0); });
    const ScalarField ma = ma_det(q, disk);
    CHECK((ma.array() - 1.0).abs().maxCoeff() <= 1e-9);
    CHECK(ma_det(ScalarField::Zero(disk.interior_count()), disk).cwiseAbs().maxCoeff() == 0.0);

    // saddle: the axis pair gives (2)^+ (-2)^+ - (0 + 2) = -2, the diagonal pair 0
    const Grid g = build_grid(kBig, 0.25);
    const ScalarField saddle = sample(g, [](Point p) { return p.x * p.x - p.y * p.y; });
    for (int n : deep_nodes(g)) {
        int active = -1;
        const double v = ma_det_at(saddle, g, n, MaOptions{1.0}, &active);
        CHECK(v == doctest::Approx(-2.0).epsilon(1e-12));
        CHECK(v < 0.0);
        CHECK(active == 0);
    }
}

TEST_CASE("exact on quadratics aligned with a pair") {
    const Grid g = build_grid(kBig, 0.2);
    const ScalarField axis = sample(g, [](Point p) { return 0.5 * (2.0 * p.x * p.x + 6.0 * p.y * p.y); });
    // A = R diag(1, 5) R^T with R the rotation by pi/4
    const ScalarField diag = sample(g, [](Point p) {
        const double s = (p.x + p.y) / std::sqrt(2.0), t = (p.y - p.x) / std::sqrt(2.0);
        return 0.5 * (1.0 * s * s + 5.0 * t * t);
    });
    for (int n : deep_nodes(g)) {
        CHECK(ma_det_at(axis, g, n) == doctest::Approx(12.0).epsilon(1e-10));
        CHECK(ma_det_at(diag, g, n) == doctest::Approx(5.0).epsilon(1e-10));
    }
}

TEST_CASE("consistency on the disk paraboloid") {
    for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
        for (int k : {2, 4}) {
            const Grid g = build_grid(ConvexDomain::disk({0, 0}, 2.0), h, StencilSet{k});
            const ScalarField u = sample(g, [](Point p) { return 0.5 * (p.x * p.x + p.y * p.y - 4.0); });
            // Shortley-Weller differences are exact for quadratics vanishing on the boundary.
            CHECK((ma_det(u, g).array() - 1.0).abs().maxCoeff() <= 1e-9);
        }
    }
}

TEST_CASE("laplacian and central hessian") {
    const Grid g = build_grid(kBig, 0.25);
    const ScalarField half = sample(g, [](Point p) { return 0.5 * (p.x * p.x + p.y * p.y); });
    const ScalarField x1sq = sample(g, [](Point p) { return p.x * p.x; });
    const ScalarField x1x2 = sample(g, [](Point p) { return p.x * p.y; });
    const ScalarField aniso = sample(g, [](Point p) { return p.x * p.x + 3.0 * p.y * p.y; });
    const ScalarField zero = ScalarField::Zero(g.interior_count());
    const ScalarField lh = laplacian(half, g), lx = laplacian(x1sq, g), lz = laplacian(zero, g);
    for (int n : deep_nodes(g)) {
        CHECK(lh[n] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(lx[n] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(lz[n] == 0.0);
        const auto h1 = central_hessian(x1x2, g, n);
        const auto h2 = central_hessian(aniso, g, n);
        const auto h3 = central_hessian(zero, g, n);
        REQUIRE(h1);
        REQUIRE(h2);
        REQUIRE(h3);
        CHECK((*h1 - Eigen::Matrix2d{{0, 1}, {1, 0}}).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((*h2 - Eigen::Matrix2d{{2, 0}, {0, 6}}).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(h3->cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("is_discretely_convex") {
    const Grid g = build_grid(ConvexDomain::disk({0, 0}, 1.0), 1.0 / 16);
    const ScalarField q = sample(g, [](Point p) { return 0.5 * (p.x * p.x + p.y * p.y - 1.0); });
    CHECK(is_discretely_convex(q, g));
    CHECK_FALSE(is_discretely_convex(-q, g));
    CHECK(is_discretely_convex(ScalarField::Zero(g.interior_count()), g, 1e-12));
}

TEST_CASE("monotone in neighbor values") {
    std::mt19937_64 rng(7);
    for (int k : {2, 3}) {
        const Grid g = build_grid(ConvexDomain::ellipse({0, 0}, 1.3, 0.8, 0.5), 1.0 / 16, StencilSet{k});
        const ScalarField base = sample(g, [](Point p) {
            return 0.5 * (p.x * p.x / 1.69 + p.y * p.y / 0.64 - 1.0) + 0.05 * std::cos(3.0 * p.x) * std::cos(2.0 * p.y);
        });
        std::uniform_int_distribution<int> node(0, g.interior_count() - 1), dir(0, g.stencil().direction_count() - 1);
        std::uniform_real_distribution<double> bump(1e-4, 1e-2);
        int tried = 0;
        while (tried < 400) {
            const int n = node(rng);
            const Ray& r = g.ray(n, dir(rng), rng() % 2 ? 1 : -1);
            if (r.neighbor < 0) continue;
            ++tried;
            ScalarField u = base;
            u[r.neighbor] += bump(rng);
            CHECK(ma_det_at(u, g, n) >= ma_det_at(base, g, n) - 1e-12);
        }
    }
}

TEST_CASE("discrete AM-GM on convex fields") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> coef(0.1, 3.0), off(-1.0, 1.0);
    const Grid g = build_grid(kBig, 0.2, StencilSet{3});
    const auto deep = deep_nodes(g);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = coef(rng), c = coef(rng), b = off(rng) * std::sqrt(a * c);
        const ScalarField u = sample(g, [&](Point p) { return a * p.x * p.x + 2 * b * p.x * p.y + c * p.y * p.y; });
        const ScalarField ma = ma_det(u, g), lap = laplacian(u, g);
        for (int n : deep) CHECK(kDim * std::sqrt(std::max(ma[n], 0.0)) <= lap[n] + 1e-9);
    }
}

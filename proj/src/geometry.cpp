#include "masys/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <span>

#include "masys/errors.hpp"

namespace masys {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::array<Point, 4> rectangle_vertices(const Rectangle& r) {
    return {Point{r.lo.x, r.lo.y}, Point{r.hi.x, r.lo.y}, Point{r.hi.x, r.hi.y}, Point{r.lo.x, r.hi.y}};
}

// Signed distance of p to the supporting line of edge i (negative inside).
double edge_offset(std::span<const Point> v, std::size_t i, Point p) {
    const Point a = v[i];
    const Point b = v[(i + 1) % v.size()];
    const Point e = b - a;
    return -cross(e, p - a) / std::hypot(e.x, e.y);
}

bool polygon_contains(std::span<const Point> v, Point p) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (edge_offset(v, i, p) >= 0.0) return false;
    }
    return true;
}

double polygon_defect(std::span<const Point> v, Point p) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, edge_offset(v, i, p));
    return worst;
}

double polygon_area(std::span<const Point> v) {
    double twice = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) twice += cross(v[i], v[(i + 1) % v.size()]);
    return 0.5 * twice;
}

double polygon_diameter(std::span<const Point> v) {
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j) d = std::max(d, std::hypot(v[i].x - v[j].x, v[i].y - v[j].y));
    return d;
}

double polygon_ray_exit(std::span<const Point> v, Point p, Point dir) {
    double t_exit = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Point e = v[(i + 1) % v.size()] - v[i];
        const double len = std::hypot(e.x, e.y);
        const Point outward{e.y / len, -e.x / len};
        const double rate = dot(outward, dir);
        if (rate <= 0.0) continue;
        t_exit = std::min(t_exit, -dot(outward, p - v[i]) / rate);
    }
    return t_exit;
}

// Local (unrotated, centered) coordinates of p for an ellipse.
Point ellipse_local(const Ellipse& e, Point p) {
    const Point d = p - e.center;
    const double c = std::cos(e.rotation), s = std::sin(e.rotation);
    return {c * d.x + s * d.y, -s * d.x + c * d.y};
}

// Positive root t of |(q + t d) / (a, b)|^2 = 1 for q strictly inside.
double ellipse_ray_exit_local(double a, double b, Point q, Point d) {
    const double qa = q.x / a, qb = q.y / b, da = d.x / a, db = d.y / b;
    const double A = da * da + db * db;
    const double B = 2.0 * (qa * da + qb * db);
    const double C = qa * qa + qb * qb - 1.0;
    const double disc = std::sqrt(B * B - 4.0 * A * C);
    return B >= 0.0 ? -2.0 * C / (B + disc) : (-B + disc) / (2.0 * A);
}

// Distance from (y0, y1), y0, y1 >= 0, inside the ellipse with semi-axes
// e0 >= e1 to its boundary (Eberly's bisection on the normal parameter).
double ellipse_distance_quadrant(double e0, double e1, double y0, double y1) {
    if (y1 > 0.0) {
        if (y0 > 0.0) {
            const double z0 = y0 / e0, z1 = y1 / e1;
            const double g = z0 * z0 + z1 * z1 - 1.0;
            if (g == 0.0) return 0.0;
            const double r0 = (e0 / e1) * (e0 / e1);
            const double n0 = r0 * z0;
            double s0 = z1 - 1.0;
            double s1 = g < 0.0 ? 0.0 : std::hypot(n0, z1) - 1.0;
            double s = 0.0;
            for (int it = 0; it < 2000; ++it) {
                s = 0.5 * (s0 + s1);
                if (s == s0 || s == s1) break;
                const double ratio0 = n0 / (s + r0), ratio1 = z1 / (s + 1.0);
                const double gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
                if (gs > 0.0) {
                    s0 = s;
                } else if (gs < 0.0) {
                    s1 = s;
                } else {
                    break;
                }
            }
            const double x0 = r0 * y0 / (s + r0), x1 = y1 / (s + 1.0);
            return std::hypot(x0 - y0, x1 - y1);
        }
        return std::abs(y1 - e1);
    }
    const double numer0 = e0 * y0, denom0 = e0 * e0 - e1 * e1;
    if (numer0 < denom0) {
        const double xde0 = numer0 / denom0;
        const double x0 = e0 * xde0, x1 = e1 * std::sqrt(1.0 - xde0 * xde0);
        return std::hypot(x0 - y0, x1);
    }
    return std::abs(y0 - e0);
}

void validate_polygon(const std::vector<Point>& v) {
    if (v.size() < 3) throw InvalidInput("polygon needs at least 3 vertices");
    double turning = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Point e0 = v[(i + 1) % v.size()] - v[i];
        const Point e1 = v[(i + 2) % v.size()] - v[(i + 1) % v.size()];
        const double c = cross(e0, e1);
        if (!(c > 0.0)) {
            throw InvalidInput("polygon vertices must form a strictly convex counterclockwise chain (vertex " +
                               std::to_string((i + 1) % v.size()) + ")");
        }
        turning += std::atan2(c, dot(e0, e1));
    }
    // A self-intersecting star also has all-positive turns but winds more than once.
    if (std::abs(turning - 2.0 * std::numbers::pi) > 1e-6) {
        throw InvalidInput("polygon vertex chain winds more than once");
    }
}

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput(std::string(what) + " must be positive and finite");
}

}  // namespace

Mat2 Mat2::rotation(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c, -s, s, c};
}

ConvexDomain ConvexDomain::disk(Point center, double radius) {
    require_positive(radius, "disk radius");
    return ConvexDomain(Disk{center, radius});
}

ConvexDomain ConvexDomain::ellipse(Point center, double semi_a, double semi_b, double rotation) {
    require_positive(semi_a, "ellipse semi-axis a");
    require_positive(semi_b, "ellipse semi-axis b");
    return ConvexDomain(Ellipse{center, semi_a, semi_b, rotation});
}

ConvexDomain ConvexDomain::polygon(std::vector<Point> vertices) {
    validate_polygon(vertices);
    return ConvexDomain(ConvexPolygon{std::move(vertices)});
}

ConvexDomain ConvexDomain::rectangle(Point corner0, Point corner1) {
    Rectangle r{{std::min(corner0.x, corner1.x), std::min(corner0.y, corner1.y)},
                {std::max(corner0.x, corner1.x), std::max(corner0.y, corner1.y)}};
    require_positive(r.hi.x - r.lo.x, "rectangle width");
    require_positive(r.hi.y - r.lo.y, "rectangle height");
    return ConvexDomain(r);
}

ConvexDomain ConvexDomain::square(double side) { return rectangle({0.0, 0.0}, {side, side}); }

std::string ConvexDomain::kind() const {
    return std::visit(Overloaded{[](const Disk&) { return std::string("disk"); },
                                 [](const Ellipse&) { return std::string("ellipse"); },
                                 [](const ConvexPolygon&) { return std::string("polygon"); },
                                 [](const Rectangle&) { return std::string("rect"); }},
                      shape_);
}

std::string ConvexDomain::describe() const {
    const auto f = format_number;
    return std::visit(
        Overloaded{
            [&](const Disk& d) { return "disk:" + f(d.center.x) + "," + f(d.center.y) + "," + f(d.radius); },
            [&](const Ellipse& e) {
                return "ellipse:" + f(e.center.x) + "," + f(e.center.y) + "," + f(e.semi_a) + "," + f(e.semi_b) +
                       "," + f(e.rotation);
            },
            [&](const ConvexPolygon& p) {
                std::string out = "polygon:";
                for (std::size_t i = 0; i < p.vertices.size(); ++i) {
                    if (i) out += ";";
                    out += f(p.vertices[i].x) + "," + f(p.vertices[i].y);
                }
                return out;
            },
            [&](const Rectangle& r) {
                return "rect:" + f(r.lo.x) + "," + f(r.lo.y) + "," + f(r.hi.x) + "," + f(r.hi.y);
            }},
        shape_);
}

bool ConvexDomain::contains(Point p) const {
    return std::visit(Overloaded{[&](const Disk& d) {
                                     const Point q = p - d.center;
                                     return dot(q, q) < d.radius * d.radius;
                                 },
                                 [&](const Ellipse& e) {
                                     const Point q = ellipse_local(e, p);
                                     const double qa = q.x / e.semi_a, qb = q.y / e.semi_b;
                                     return qa * qa + qb * qb < 1.0;
                                 },
                                 [&](const ConvexPolygon& poly) { return polygon_contains(poly.vertices, p); },
                                 [&](const Rectangle& r) {
                                     return p.x > r.lo.x && p.x < r.hi.x && p.y > r.lo.y && p.y < r.hi.y;
                                 }},
                      shape_);
}

double ConvexDomain::area() const {
    return std::visit(Overloaded{[](const Disk& d) { return std::numbers::pi * d.radius * d.radius; },
                                 [](const Ellipse& e) { return std::numbers::pi * e.semi_a * e.semi_b; },
                                 [](const ConvexPolygon& p) { return polygon_area(p.vertices); },
                                 [](const Rectangle& r) { return (r.hi.x - r.lo.x) * (r.hi.y - r.lo.y); }},
                      shape_);
}

double ConvexDomain::diameter() const {
    return std::visit(Overloaded{[](const Disk& d) { return 2.0 * d.radius; },
                                 [](const Ellipse& e) { return 2.0 * std::max(e.semi_a, e.semi_b); },
                                 [](const ConvexPolygon& p) { return polygon_diameter(p.vertices); },
                                 [](const Rectangle& r) { return std::hypot(r.hi.x - r.lo.x, r.hi.y - r.lo.y); }},
                      shape_);
}

Box ConvexDomain::bounding_box() const {
    return std::visit(
        Overloaded{[](const Disk& d) {
                       return Box{{d.center.x - d.radius, d.center.y - d.radius},
                                  {d.center.x + d.radius, d.center.y + d.radius}};
                   },
                   [](const Ellipse& e) {
                       const double c = std::cos(e.rotation), s = std::sin(e.rotation);
                       const double wx = std::hypot(e.semi_a * c, e.semi_b * s);
                       const double wy = std::hypot(e.semi_a * s, e.semi_b * c);
                       return Box{{e.center.x - wx, e.center.y - wy}, {e.center.x + wx, e.center.y + wy}};
                   },
                   [](const ConvexPolygon& p) {
                       Box b{p.vertices.front(), p.vertices.front()};
                       for (const auto& v : p.vertices) {
                           b.lo = {std::min(b.lo.x, v.x), std::min(b.lo.y, v.y)};
                           b.hi = {std::max(b.hi.x, v.x), std::max(b.hi.y, v.y)};
                       }
                       return b;
                   },
                   [](const Rectangle& r) { return Box{r.lo, r.hi}; }},
        shape_);
}

double ConvexDomain::boundary_distance(Point p) const {
    if (!contains(p)) throw InvalidInput("boundary_distance: point is not interior");
    return std::visit(Overloaded{[&](const Disk& d) {
                                     const Point q = p - d.center;
                                     return d.radius - std::hypot(q.x, q.y);
                                 },
                                 [&](const Ellipse& e) {
                                     const Point q = ellipse_local(e, p);
                                     if (e.semi_a >= e.semi_b)
                                         return ellipse_distance_quadrant(e.semi_a, e.semi_b, std::abs(q.x),
                                                                          std::abs(q.y));
                                     return ellipse_distance_quadrant(e.semi_b, e.semi_a, std::abs(q.y),
                                                                      std::abs(q.x));
                                 },
                                 [&](const ConvexPolygon& poly) { return -polygon_defect(poly.vertices, p); },
                                 [&](const Rectangle& r) { return -polygon_defect(rectangle_vertices(r), p); }},
                      shape_);
}

double ConvexDomain::ray_exit_distance(Point p, Point dir) const {
    if (!contains(p)) throw InvalidInput("boundary_fraction: point is not interior to the domain");
    const double len = std::hypot(dir.x, dir.y);
    if (!(len > 0.0)) throw InvalidInput("ray direction must be nonzero");
    const Point d = (1.0 / len) * dir;
    return std::visit(Overloaded{[&](const Disk& disk) {
                                     return ellipse_ray_exit_local(disk.radius, disk.radius, p - disk.center, d);
                                 },
                                 [&](const Ellipse& e) {
                                     const double c = std::cos(e.rotation), s = std::sin(e.rotation);
                                     const Point dl{c * d.x + s * d.y, -s * d.x + c * d.y};
                                     return ellipse_ray_exit_local(e.semi_a, e.semi_b, ellipse_local(e, p), dl);
                                 },
                                 [&](const ConvexPolygon& poly) { return polygon_ray_exit(poly.vertices, p, d); },
                                 [&](const Rectangle& r) { return polygon_ray_exit(rectangle_vertices(r), p, d); }},
                      shape_);
}

double ConvexDomain::boundary_defect(Point p) const {
    return std::visit(Overloaded{[&](const Disk& d) {
                                     const Point q = p - d.center;
                                     return std::hypot(q.x, q.y) - d.radius;
                                 },
                                 [&](const Ellipse& e) {
                                     const Point q = ellipse_local(e, p);
                                     return std::hypot(q.x / e.semi_a, q.y / e.semi_b) - 1.0;
                                 },
                                 [&](const ConvexPolygon& poly) { return polygon_defect(poly.vertices, p); },
                                 [&](const Rectangle& r) { return polygon_defect(rectangle_vertices(r), p); }},
                      shape_);
}

ConvexDomain ConvexDomain::as_polygon(int vertex_count) const {
    auto sample_ellipse = [&](Point c, double a, double b, double rot) {
        if (vertex_count < 3) throw InvalidInput("inscribed polygon needs at least 3 vertices");
        const double cr = std::cos(rot), sr = std::sin(rot);
        std::vector<Point> v;
        v.reserve(static_cast<std::size_t>(vertex_count));
        for (int k = 0; k < vertex_count; ++k) {
            const double t = 2.0 * std::numbers::pi * k / vertex_count;
            const double lx = a * std::cos(t), ly = b * std::sin(t);
            v.push_back({c.x + cr * lx - sr * ly, c.y + sr * lx + cr * ly});
        }
        return ConvexDomain::polygon(std::move(v));
    };
    return std::visit(Overloaded{[&](const Disk& d) { return sample_ellipse(d.center, d.radius, d.radius, 0.0); },
                                 [&](const Ellipse& e) { return sample_ellipse(e.center, e.semi_a, e.semi_b, e.rotation); },
                                 [&](const ConvexPolygon&) { return *this; },
                                 [&](const Rectangle& r) {
                                     const auto v = rectangle_vertices(r);
                                     return ConvexDomain::polygon({v.begin(), v.end()});
                                 }},
                      shape_);
}

double boundary_fraction(const ConvexDomain& domain, Point p, LatticeDirection e, double h) {
    const double step = e.length() * h;
    const double s = domain.ray_exit_distance(p, {static_cast<double>(e.dx), static_cast<double>(e.dy)});
    return std::min(1.0, s / step);
}

ConvexDomain apply_unimodular(const ConvexDomain& domain, const Mat2& t, int vertex_count) {
    if (std::abs(t.det() - 1.0) > 1e-12) {
        throw InvalidInput("apply_unimodular: det T = " + format_number(t.det()) + " is not 1");
    }
    const ConvexDomain poly = domain.as_polygon(vertex_count);
    std::vector<Point> mapped;
    for (const auto& v : std::get<ConvexPolygon>(poly.shape()).vertices) mapped.push_back(t.apply(v));
    return ConvexDomain::polygon(std::move(mapped));
}

Grid::Grid(const ConvexDomain& domain, double h, const StencilSet& stencil)
    : domain_(domain), stencil_(stencil), h_(h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("grid spacing h must be positive");
    const Box bb = domain.bounding_box();
    origin_ = bb.lo;
    nx_ = static_cast<int>(std::ceil((bb.hi.x - bb.lo.x) / h - 1e-9)) + 1;
    ny_ = static_cast<int>(std::ceil((bb.hi.y - bb.lo.y) / h - 1e-9)) + 1;
    if (static_cast<double>(nx_) * ny_ > 5e7) throw InvalidInput("grid too fine: more than 5e7 lattice nodes");

    lattice_to_node_.assign(static_cast<std::size_t>(nx_) * ny_, -1);
    for (int j = 0; j < ny_; ++j) {
        for (int i = 0; i < nx_; ++i) {
            if (domain.contains(lattice_point(i, j))) {
                lattice_to_node_[static_cast<std::size_t>(j) * nx_ + i] = static_cast<int>(nodes_.size());
                nodes_.push_back({i, j});
            }
        }
    }
    if (nodes_.empty()) throw InvalidInput("grid too coarse: no interior nodes at h = " + format_number(h));

    // Interior must be edge-connected, otherwise pieces decouple.
    std::vector<char> seen(nodes_.size(), 0);
    std::queue<int> todo;
    todo.push(0);
    seen[0] = 1;
    std::size_t reached = 1;
    while (!todo.empty()) {
        const auto [i, j] = nodes_[static_cast<std::size_t>(todo.front())];
        todo.pop();
        const int nbrs[4][2] = {{i + 1, j}, {i - 1, j}, {i, j + 1}, {i, j - 1}};
        for (const auto& q : nbrs) {
            const int k = index(q[0], q[1]);
            if (k >= 0 && !seen[static_cast<std::size_t>(k)]) {
                seen[static_cast<std::size_t>(k)] = 1;
                ++reached;
                todo.push(k);
            }
        }
    }
    if (reached != nodes_.size()) {
        throw InvalidInput("grid too coarse: interior nodes are not edge-connected at h = " + format_number(h));
    }

    const int ndir = stencil_.direction_count();
    rays_.resize(nodes_.size() * 2 * static_cast<std::size_t>(ndir));
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
        const auto [i, j] = nodes_[n];
        for (int d = 0; d < ndir; ++d) {
            const LatticeDirection e = stencil_.direction(d);
            for (int sign : {+1, -1}) {
                Ray& r = rays_[n * 2 * ndir + 2 * d + (sign > 0 ? 0 : 1)];
                const int k = index(i + sign * e.dx, j + sign * e.dy);
                if (k >= 0) {
                    r = {k, 1.0};
                } else {
                    r = {-1, boundary_fraction(domain, lattice_point(i, j), {sign * e.dx, sign * e.dy}, h)};
                }
            }
        }
    }
}

int Grid::index(int i, int j) const {
    if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return -1;
    return lattice_to_node_[static_cast<std::size_t>(j) * nx_ + i];
}

Grid build_grid(const ConvexDomain& domain, double h, const StencilSet& stencil) { return Grid(domain, h, stencil); }

}  // namespace masys

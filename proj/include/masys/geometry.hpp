#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "masys/stencil.hpp"

namespace masys {

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }

struct Box {
    Point lo;
    Point hi;
};

/// Row-major 2x2 matrix.
struct Mat2 {
    double a11 = 1.0, a12 = 0.0, a21 = 0.0, a22 = 1.0;

    double det() const { return a11 * a22 - a12 * a21; }
    Point apply(Point p) const { return {a11 * p.x + a12 * p.y, a21 * p.x + a22 * p.y}; }
    static Mat2 rotation(double angle);
};

struct Disk {
    Point center;
    double radius = 1.0;
};

struct Ellipse {
    Point center;
    double semi_a = 1.0;  // along the rotated x axis
    double semi_b = 1.0;
    double rotation = 0.0;
};

/// Strictly convex, counterclockwise vertex chain.
struct ConvexPolygon {
    std::vector<Point> vertices;
};

/// Axis-aligned rectangle given by two opposite corners.
struct Rectangle {
    Point lo;
    Point hi;
};

/// Bounded open convex set in the plane. Immutable after construction; all
/// constructors validate their invariants and throw InvalidInput.
class ConvexDomain {
public:
    using Shape = std::variant<Disk, Ellipse, ConvexPolygon, Rectangle>;

    static ConvexDomain disk(Point center, double radius);
    static ConvexDomain ellipse(Point center, double semi_a, double semi_b, double rotation = 0.0);
    static ConvexDomain polygon(std::vector<Point> vertices);
    static ConvexDomain rectangle(Point corner0, Point corner1);
    /// (0,side)^2.
    static ConvexDomain square(double side = 1.0);

    const Shape& shape() const { return shape_; }
    std::string kind() const;
    /// Canonical text form, e.g. "disk:0,0,1". Stable across runs; hashed
    /// into field dump headers.
    std::string describe() const;

    bool contains(Point p) const;
    double area() const;
    double diameter() const;
    Box bounding_box() const;
    /// Distance from an interior point to the boundary.
    double boundary_distance(Point p) const;
    /// Distance s > 0 from an interior point to the boundary along the unit
    /// vector `dir`. Throws InvalidInput if p is not interior.
    double ray_exit_distance(Point p, Point dir) const;
    /// Signed defect of the boundary equation at p: zero exactly on the boundary.
    double boundary_defect(Point p) const;

    /// Inscribed polygon with `vertex_count` vertices for the analytic shapes;
    /// the vertex chain itself for polygons and rectangles.
    ConvexDomain as_polygon(int vertex_count = 256) const;

private:
    explicit ConvexDomain(Shape s) : shape_(std::move(s)) {}
    Shape shape_;
};

/// theta = min(1, s / (|e| h)) where s is the exact distance to the boundary
/// from `p` along +e.
double boundary_fraction(const ConvexDomain& domain, Point p, LatticeDirection e, double h);

/// T(domain) for det T = 1. Analytic shapes are first replaced by an inscribed
/// polygon with `vertex_count` vertices.
ConvexDomain apply_unimodular(const ConvexDomain& domain, const Mat2& t, int vertex_count = 256);

/// Ray data for one interior node in one signed stencil direction.
struct Ray {
    std::int32_t neighbor = -1;  // interior node index, or -1 if the ray exits
    double theta = 1.0;          // boundary hit at theta*|e|*h (1 if neighbor is a node)
};

/// Uniform Cartesian lattice over the domain's bounding box, anchored at the
/// box's lower corner. Only nodes strictly inside the domain carry unknowns.
class Grid {
public:
    Grid(const ConvexDomain& domain, double h, const StencilSet& stencil);

    const ConvexDomain& domain() const { return domain_; }
    const StencilSet& stencil() const { return stencil_; }
    double h() const { return h_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    Point origin() const { return origin_; }
    Box box() const { return {origin_, {origin_.x + (nx_ - 1) * h_, origin_.y + (ny_ - 1) * h_}}; }
    int interior_count() const { return static_cast<int>(nodes_.size()); }

    Point lattice_point(int i, int j) const { return {origin_.x + i * h_, origin_.y + j * h_}; }
    /// Interior index of lattice node (i, j), or -1.
    int index(int i, int j) const;
    Point position(int node) const { return lattice_point(nodes_[node][0], nodes_[node][1]); }
    std::array<int, 2> lattice_coords(int node) const { return nodes_[node]; }

    /// Signed ray: direction d (see StencilSet), sign +1 or -1.
    const Ray& ray(int node, int d, int sign) const {
        return rays_[static_cast<std::size_t>(node) * 2 * stencil_.direction_count() + 2 * d + (sign > 0 ? 0 : 1)];
    }

private:
    ConvexDomain domain_;
    StencilSet stencil_;
    double h_;
    Point origin_;
    int nx_ = 0;
    int ny_ = 0;
    std::vector<int> lattice_to_node_;
    std::vector<std::array<int, 2>> nodes_;
    std::vector<Ray> rays_;
};

/// Same as the Grid constructor; throws InvalidInput("grid too coarse ...")
/// when no interior node exists or the interior is not edge-connected.
Grid build_grid(const ConvexDomain& domain, double h, const StencilSet& stencil = StencilSet{2});

}  // namespace masys

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace slmc {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
double distance(Point2 a, Point2 b);

/// Closed simple polygon, stored without the repeated closing vertex.
using Polygon = std::vector<Point2>;

double polygon_area(const Polygon& poly);  // signed; positive for CCW
Point2 polygon_centroid(const Polygon& poly);

/// Boundary-inclusive point-in-polygon test (even-odd rule; points within
/// `boundary_eps` of an edge count as inside).
bool point_in_polygon(const Polygon& poly, Point2 p, double boundary_eps = 1e-9);

struct BoundingBox {
    double xmin = 0, ymin = 0, xmax = 0, ymax = 0;
    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
};

class GeometryError : public std::runtime_error {
public:
    explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bounded study window: a closed simple polygon with positive area.
class Window {
public:
    explicit Window(Polygon boundary);

    /// The built-in irregular 12-vertex window used by the simulation
    /// scenarios. Chosen so that the hexagonal partition has 17 regions at
    /// side 1.5 and 29 regions at side 1.
    static Window default_window();

    const Polygon& boundary() const { return boundary_; }
    const BoundingBox& bbox() const { return bbox_; }
    double area() const { return area_; }
    double diameter() const;
    bool contains(Point2 p, double boundary_eps = 1e-9) const;

private:
    Polygon boundary_;  // normalised to CCW order
    BoundingBox bbox_;
    double area_ = 0;
};

/// Window partitioned by a flat-top hexagonal tiling clipped to the window.
/// Regions are indexed row-major over the tiling axes; the tiling is anchored
/// at the centre of the window bounding box.
class Partition {
public:
    const Window& window() const { return window_; }
    double side() const { return side_; }
    int size() const { return static_cast<int>(regions_.size()); }

    const Polygon& region(int r) const;
    double region_area(int r) const;

    /// Stored centroid of the clipped region; clamped to an interior point
    /// when the polygon centroid of a non-convex fragment falls outside.
    Point2 centroid(int r) const;

    /// Region index containing `p`. Boundary points resolve to the lowest
    /// region index among the regions touching them. Throws GeometryError
    /// for points outside the window.
    int locate(Point2 p) const;

    /// Centre of the (unclipped) hexagon that generated region r.
    Point2 hex_center(int r) const;

private:
    friend Partition build_hex_partition(const Window&, double);
    Window window_{Polygon{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
    double side_ = 1.0;
    std::vector<Polygon> regions_;
    std::vector<Point2> centroids_;
    std::vector<double> areas_;
    std::vector<Point2> hex_centers_;
};

/// Clip a flat-top hexagonal tiling of side `side` to `window`, keeping every
/// fragment with positive area as its own region.
Partition build_hex_partition(const Window& window, double side);

/// Intersection of a (possibly concave) subject polygon with a convex clip
/// polygon (Sutherland-Hodgman).
Polygon clip_polygon_convex(const Polygon& subject, const Polygon& convex_clip);

}  // namespace slmc

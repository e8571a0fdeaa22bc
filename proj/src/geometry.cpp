#include "slmc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace slmc {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kAreaEps = 1e-9;  // fragments below this are treated as empty

double cross(Point2 o, Point2 a, Point2 b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double dist_point_segment(Point2 p, Point2 a, Point2 b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / len2, 0.0, 1.0);
    const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
    return std::hypot(dx, dy);
}

bool segments_properly_intersect(Point2 a, Point2 b, Point2 c, Point2 d) {
    const double d1 = cross(c, d, a);
    const double d2 = cross(c, d, b);
    const double d3 = cross(a, b, c);
    const double d4 = cross(a, b, d);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
           ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

bool polygon_is_simple(const Polygon& poly) {
    const int n = static_cast<int>(poly.size());
    for (int i = 0; i < n; ++i) {
        const Point2 a = poly[i], b = poly[(i + 1) % n];
        for (int j = i + 1; j < n; ++j) {
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
            const Point2 c = poly[j], d = poly[(j + 1) % n];
            if (segments_properly_intersect(a, b, c, d)) return false;
        }
    }
    return true;
}

Polygon hexagon(Point2 center, double side) {
    Polygon h;
    h.reserve(6);
    for (int k = 0; k < 6; ++k) {
        const double a = kPi / 3.0 * k;
        h.push_back({center.x + side * std::cos(a), center.y + side * std::sin(a)});
    }
    return h;
}

// Drop consecutive near-duplicate vertices produced by clipping.
Polygon dedup(const Polygon& poly, double eps = 1e-12) {
    Polygon out;
    for (const Point2& p : poly) {
        if (out.empty() || distance(out.back(), p) > eps) out.push_back(p);
    }
    while (out.size() > 1 && distance(out.front(), out.back()) <= eps) out.pop_back();
    return out;
}

}  // namespace

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

double polygon_area(const Polygon& poly) {
    const int n = static_cast<int>(poly.size());
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const Point2 a = poly[i], b = poly[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    return 0.5 * s;
}

Point2 polygon_centroid(const Polygon& poly) {
    const int n = static_cast<int>(poly.size());
    double a2 = 0.0, cx = 0.0, cy = 0.0;
    for (int i = 0; i < n; ++i) {
        const Point2 p = poly[i], q = poly[(i + 1) % n];
        const double w = p.x * q.y - q.x * p.y;
        a2 += w;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    if (std::abs(a2) < 1e-300) {
        // degenerate polygon: fall back to vertex mean
        Point2 m{0, 0};
        for (const Point2& p : poly) m = m + p;
        return {m.x / n, m.y / n};
    }
    return {cx / (3.0 * a2), cy / (3.0 * a2)};
}

bool point_in_polygon(const Polygon& poly, Point2 p, double boundary_eps) {
    const int n = static_cast<int>(poly.size());
    for (int i = 0; i < n; ++i) {
        if (dist_point_segment(p, poly[i], poly[(i + 1) % n]) <= boundary_eps) return true;
    }
    bool inside = false;
    for (int i = 0, j = n - 1; i < n; j = i++) {
        const Point2 a = poly[i], b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xint = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (p.x < xint) inside = !inside;
        }
    }
    return inside;
}

Window::Window(Polygon boundary) : boundary_(std::move(boundary)) {
    if (boundary_.size() < 3) throw GeometryError("window: polygon needs at least 3 vertices");
    double a = polygon_area(boundary_);
    if (a < 0) {  // normalise to CCW
        std::reverse(boundary_.begin(), boundary_.end());
        a = -a;
    }
    if (a <= 0.0 || std::abs(a) < 1e-12)
        throw GeometryError("window: degenerate polygon (zero area)");
    if (!polygon_is_simple(boundary_))
        throw GeometryError("window: polygon is self-intersecting");
    area_ = a;
    bbox_.xmin = bbox_.xmax = boundary_[0].x;
    bbox_.ymin = bbox_.ymax = boundary_[0].y;
    for (const Point2& p : boundary_) {
        bbox_.xmin = std::min(bbox_.xmin, p.x);
        bbox_.xmax = std::max(bbox_.xmax, p.x);
        bbox_.ymin = std::min(bbox_.ymin, p.y);
        bbox_.ymax = std::max(bbox_.ymax, p.y);
    }
}

Window Window::default_window() {
    return Window(Polygon{{9.95, 5.70},
                          {9.95, 7.68},
                          {5.75, 8.76},
                          {2.01, 9.16},
                          {1.38, 8.09},
                          {3.76, 5.13},
                          {0.60, 4.87},
                          {2.65, 2.72},
                          {3.02, 0.07},
                          {4.21, 0.77},
                          {7.52, 0.15},
                          {5.56, 5.42}});
}

double Window::diameter() const {
    double d = 0.0;
    for (size_t i = 0; i < boundary_.size(); ++i)
        for (size_t j = i + 1; j < boundary_.size(); ++j)
            d = std::max(d, distance(boundary_[i], boundary_[j]));
    return d;
}

bool Window::contains(Point2 p, double boundary_eps) const {
    if (p.x < bbox_.xmin - boundary_eps || p.x > bbox_.xmax + boundary_eps ||
        p.y < bbox_.ymin - boundary_eps || p.y > bbox_.ymax + boundary_eps)
        return false;
    return point_in_polygon(boundary_, p, boundary_eps);
}

Polygon clip_polygon_convex(const Polygon& subject, const Polygon& convex_clip) {
    Polygon poly = subject;
    const int m = static_cast<int>(convex_clip.size());
    for (int e = 0; e < m && !poly.empty(); ++e) {
        const Point2 a = convex_clip[e];
        const Point2 b = convex_clip[(e + 1) % m];
        Polygon out;
        const int n = static_cast<int>(poly.size());
        for (int i = 0; i < n; ++i) {
            const Point2 p = poly[i], q = poly[(i + 1) % n];
            const double dp = cross(a, b, p);
            const double dq = cross(a, b, q);
            if (dp >= 0.0) out.push_back(p);
            if ((dp >= 0.0) != (dq >= 0.0)) {
                const double t = dp / (dp - dq);
                out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
            }
        }
        poly = std::move(out);
    }
    return dedup(poly);
}

const Polygon& Partition::region(int r) const {
    if (r < 0 || r >= size()) throw GeometryError("partition: region index out of range");
    return regions_[r];
}

double Partition::region_area(int r) const {
    if (r < 0 || r >= size()) throw GeometryError("partition: region index out of range");
    return areas_[r];
}

Point2 Partition::centroid(int r) const {
    if (r < 0 || r >= size()) throw GeometryError("partition: region index out of range");
    return centroids_[r];
}

Point2 Partition::hex_center(int r) const {
    if (r < 0 || r >= size()) throw GeometryError("partition: region index out of range");
    return hex_centers_[r];
}

int Partition::locate(Point2 p) const {
    if (!window_.contains(p)) throw GeometryError("locate: point outside window");
    for (int r = 0; r < size(); ++r) {
        if (point_in_polygon(regions_[r], p)) return r;
    }
    // The regions cover the window, so reaching this point means `p` slipped
    // through a floating-point crack between fragments; assign by nearest
    // generating hexagon centre.
    int best = 0;
    double bestd = std::numeric_limits<double>::infinity();
    for (int r = 0; r < size(); ++r) {
        const double d = distance(p, hex_centers_[r]);
        if (d < bestd) {
            bestd = d;
            best = r;
        }
    }
    return best;
}

Partition build_hex_partition(const Window& window, double side) {
    if (!(side > 0.0)) throw GeometryError("build_hex_partition: side must be positive");

    Partition part;
    part.window_ = window;
    part.side_ = side;

    const BoundingBox& bb = window.bbox();
    const Point2 anchor{0.5 * (bb.xmin + bb.xmax), 0.5 * (bb.ymin + bb.ymax)};
    const double colstep = 1.5 * side;
    const double rowstep = kSqrt3 * side;

    const int qlo = static_cast<int>(std::floor((bb.xmin - anchor.x - side) / colstep)) - 1;
    const int qhi = static_cast<int>(std::ceil((bb.xmax - anchor.x + side) / colstep)) + 1;
    const int rlo = static_cast<int>(std::floor((bb.ymin - anchor.y - rowstep) / rowstep)) - 1;
    const int rhi = static_cast<int>(std::ceil((bb.ymax - anchor.y + rowstep) / rowstep)) + 1;

    for (int r = rlo; r <= rhi; ++r) {
        for (int q = qlo; q <= qhi; ++q) {
            const double off = (((q % 2) + 2) % 2) ? 0.5 : 0.0;
            const Point2 c{anchor.x + colstep * q, anchor.y + rowstep * (r + off)};
            Polygon frag = clip_polygon_convex(window.boundary(), hexagon(c, side));
            if (frag.size() < 3) continue;
            const double a = polygon_area(frag);
            if (a <= kAreaEps) continue;
            part.regions_.push_back(std::move(frag));
            part.areas_.push_back(a);
            part.hex_centers_.push_back(c);
        }
    }
    if (part.regions_.empty())
        throw GeometryError("build_hex_partition: no region intersects the window");

    // Centroids, clamped to an interior point of the fragment when the
    // polygon centroid of a concave fragment falls outside it.
    for (int r = 0; r < part.size(); ++r) {
        const Polygon& poly = part.regions_[r];
        Point2 c = polygon_centroid(poly);
        if (!point_in_polygon(poly, c, 0.0)) {
            BoundingBox fb;
            fb.xmin = fb.xmax = poly[0].x;
            fb.ymin = fb.ymax = poly[0].y;
            for (const Point2& p : poly) {
                fb.xmin = std::min(fb.xmin, p.x);
                fb.xmax = std::max(fb.xmax, p.x);
                fb.ymin = std::min(fb.ymin, p.y);
                fb.ymax = std::max(fb.ymax, p.y);
            }
            const int K = 48;
            Point2 best = poly[0];
            double bestd = std::numeric_limits<double>::infinity();
            bool found = false;
            for (int iy = 0; iy < K; ++iy) {
                for (int ix = 0; ix < K; ++ix) {
                    Point2 cand{fb.xmin + (ix + 0.5) / K * fb.width(),
                                fb.ymin + (iy + 0.5) / K * fb.height()};
                    if (!point_in_polygon(poly, cand, 0.0)) continue;
                    // keep a margin from the boundary so the point locates
                    // unambiguously to this region
                    bool interior = true;
                    const int nv = static_cast<int>(poly.size());
                    for (int i = 0; i < nv && interior; ++i) {
                        if (dist_point_segment(cand, poly[i], poly[(i + 1) % nv]) < 1e-6)
                            interior = false;
                    }
                    if (!interior) continue;
                    const double d = distance(cand, c);
                    if (d < bestd) {
                        bestd = d;
                        best = cand;
                        found = true;
                    }
                }
            }
            if (!found)
                throw GeometryError("build_hex_partition: failed to clamp centroid of region " +
                                    std::to_string(r));
            c = best;
        }
        part.centroids_.push_back(c);
    }
    return part;
}

}  // namespace slmc

#include <cmath>
#include <set>

#include "doctest.h"
#include "slmc/geometry.hpp"
#include "slmc/rng.hpp"
#include "test_support.hpp"

using namespace slmc;

TEST_CASE("default window is a valid 12-gon") {
    const Window w = Window::default_window();
    CHECK(w.boundary().size() == 12);
    CHECK(w.area() > 0.0);
    CHECK(w.bbox().xmin >= 0.0);
    CHECK(w.bbox().xmax <= 10.0);
}

TEST_CASE("degenerate window is rejected") {
    CHECK_THROWS_AS(Window(Polygon{{0, 0}, {1, 0}, {2, 0}}), GeometryError);
    CHECK_THROWS_AS(Window(Polygon{{0, 0}, {1, 1}, {1, 0}, {0, 1}}), GeometryError);  // bow-tie
}

TEST_CASE("hex partition region counts for the default window") {
    const Window w = Window::default_window();
    CHECK(build_hex_partition(w, 1.5).size() == 17);
    CHECK(build_hex_partition(w, 1.0).size() == 29);
    CHECK(build_hex_partition(w, w.diameter()).size() == 1);
    CHECK(build_hex_partition(w, 12.0).size() == 1);
}

TEST_CASE("side must be positive") {
    CHECK_THROWS_AS(build_hex_partition(Window::default_window(), 0.0), GeometryError);
    CHECK_THROWS_AS(build_hex_partition(Window::default_window(), -1.0), GeometryError);
}

TEST_CASE("region areas sum to the window area") {
    const Window w = Window::default_window();
    for (double side : {1.5, 1.0, 0.7}) {
        const Partition part = build_hex_partition(w, side);
        double sum = 0.0;
        for (int r = 0; r < part.size(); ++r) sum += part.region_area(r);
        CHECK(std::abs(sum - w.area()) / w.area() < 1e-9);
    }
}

TEST_CASE("partition construction is deterministic") {
    const Window w = Window::default_window();
    const Partition a = build_hex_partition(w, 1.5);
    const Partition b = build_hex_partition(w, 1.5);
    REQUIRE(a.size() == b.size());
    for (int r = 0; r < a.size(); ++r) {
        REQUIRE(a.region(r).size() == b.region(r).size());
        for (size_t v = 0; v < a.region(r).size(); ++v) {
            CHECK(a.region(r)[v].x == b.region(r)[v].x);
            CHECK(a.region(r)[v].y == b.region(r)[v].y);
        }
        CHECK(a.centroid(r).x == b.centroid(r).x);
    }
}

TEST_CASE("locate returns the containing region; centroids locate to themselves") {
    const Partition part = build_hex_partition(Window::default_window(), 1.5);
    for (int r = 0; r < part.size(); ++r) CHECK(part.locate(part.centroid(r)) == r);
}

TEST_CASE("locate rejects points outside the window") {
    const Partition part = build_hex_partition(Window::default_window(), 1.5);
    CHECK_THROWS_AS(part.locate({-5.0, -5.0}), GeometryError);
    CHECK_THROWS_AS(part.locate({9.9, 0.1}), GeometryError);  // inside bbox, outside polygon
}

TEST_CASE("boundary points resolve to the lowest touching region index") {
    const Partition part = build_hex_partition(Window::default_window(), 1.5);
    int shared_edges = 0;
    for (int r = 0; r < part.size(); ++r) {
        const Polygon& poly = part.region(r);
        for (size_t v = 0; v < poly.size(); ++v) {
            const Point2 a = poly[v], b = poly[(v + 1) % poly.size()];
            const Point2 mid{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
            if (!part.window().contains(mid)) continue;
            std::set<int> touching;
            for (int s = 0; s < part.size(); ++s)
                if (point_in_polygon(part.region(s), mid, 1e-9)) touching.insert(s);
            if (touching.size() >= 2) {
                ++shared_edges;
                CHECK(part.locate(mid) == *touching.begin());
            }
        }
    }
    CHECK(shared_edges > 10);  // the interior edges exist and were exercised
}

TEST_CASE("centroid of a square window with one huge tile is its centre") {
    const Window sq(Polygon{{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    const Partition part = build_hex_partition(sq, 5.0);
    REQUIRE(part.size() == 1);
    CHECK(part.centroid(0).x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(part.centroid(0).y == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("an uncut hexagon's centroid is the hexagon centre") {
    const Partition part = build_hex_partition(Window::default_window(), 1.0);
    const double hex_area = 1.5 * std::sqrt(3.0);  // side 1
    bool found = false;
    for (int r = 0; r < part.size(); ++r) {
        if (std::abs(part.region_area(r) - hex_area) < 1e-9) {
            found = true;
            CHECK(distance(part.centroid(r), part.hex_center(r)) < 1e-9);
        }
    }
    CHECK(found);
}

TEST_CASE("clipped border region centroid matches a raster oracle") {
    const Partition part = build_hex_partition(Window::default_window(), 1.5);
    const double hex_area = 1.5 * std::sqrt(3.0) * 1.5 * 1.5;
    int checked = 0;
    for (int r = 0; r < part.size() && checked < 4; ++r) {
        if (part.region_area(r) > 0.9 * hex_area) continue;  // want genuinely clipped ones
        const Point2 oracle = testsupport::raster_centroid(part.region(r));
        CHECK(distance(part.centroid(r), oracle) < 5e-3);
        ++checked;
    }
    CHECK(checked == 4);
}

TEST_CASE("uniform points always locate; per-region counts match areas") {
    const Window w = Window::default_window();
    const Partition part = build_hex_partition(w, 1.5);
    Rng rng(20240809);
    const int N = 10000;
    std::vector<int> count(part.size(), 0);
    int placed = 0;
    while (placed < N) {
        const Point2 p{rng.uniform(w.bbox().xmin, w.bbox().xmax),
                       rng.uniform(w.bbox().ymin, w.bbox().ymax)};
        if (!w.contains(p)) continue;
        ++count[part.locate(p)];  // must not throw
        ++placed;
    }
    for (int r = 0; r < part.size(); ++r) {
        const double prob = part.region_area(r) / w.area();
        const double se = std::sqrt(prob * (1.0 - prob) * N);
        CHECK(std::abs(count[r] - N * prob) <= 3.0 * se + 1.0);
    }
}

TEST_CASE("clip of disjoint polygons is empty") {
    const Polygon sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const Polygon far{{5, 5}, {6, 5}, {6, 6}, {5, 6}};
    const Polygon out = clip_polygon_convex(sq, far);
    CHECK(std::abs(polygon_area(out)) < 1e-12);
}

#include <cmath>

#include "doctest.h"
#include "slmc/point_process.hpp"
#include "test_support.hpp"

using namespace slmc;

namespace {

IntensityField manual_field(int nx, int ny, double x0, double y0, double dx, double dy,
                            std::vector<double> values) {
    IntensityField f;
    f.nx = nx;
    f.ny = ny;
    f.x0 = x0;
    f.y0 = y0;
    f.dx = dx;
    f.dy = dy;
    f.value = std::move(values);
    f.inside.assign(f.value.size(), 1);
    return f;
}

}  // namespace

TEST_CASE("simulate_fixed_n basics") {
    const Window w = Window::default_window();
    Rng rng(11);
    CHECK(simulate_fixed_n(IntensityFunction::constant(1.0), w, 0, rng).n() == 0);
    const PointPattern pat = simulate_fixed_n(IntensityFunction::constant(2.5), w, 500, rng);
    CHECK(pat.n() == 500);
    for (const Point2& p : pat.points) CHECK(w.contains(p));
    CHECK_THROWS(simulate_fixed_n(IntensityFunction::constant(0.0), w, 10, rng));
}

TEST_CASE("constant intensity gives area-proportional region counts") {
    const Window w = Window::default_window();
    const Partition part = build_hex_partition(w, 1.5);
    Rng rng(22);
    const int N = 10000;
    const PointPattern pat = simulate_fixed_n(IntensityFunction::constant(1.0), w, N, rng);
    std::vector<int> count(part.size(), 0);
    for (const Point2& p : pat.points) ++count[part.locate(p)];
    double stat = 0.0;
    for (int r = 0; r < part.size(); ++r) {
        const double expect = N * part.region_area(r) / w.area();
        stat += (count[r] - expect) * (count[r] - expect) / expect;
    }
    CHECK(testsupport::chi2_pvalue(stat, part.size() - 1) > 0.001);
}

TEST_CASE("two-bump intensity: counts proportional to the integral of lambda") {
    const Window w = Window::default_window();
    const Partition part = build_hex_partition(w, 1.5);
    const IntensityFunction lambda = IntensityFunction::two_bump_default();
    Rng rng(33);
    const int N = 10000;
    const PointPattern pat = simulate_fixed_n(lambda, w, N, rng);
    std::vector<int> count(part.size(), 0);
    for (const Point2& p : pat.points) ++count[part.locate(p)];

    // oracle: numerical integration of lambda over each region polygon
    std::vector<double> mass(part.size());
    double total = 0.0;
    for (int r = 0; r < part.size(); ++r) {
        mass[r] = testsupport::raster_integral(part.region(r), lambda, 500);
        total += mass[r];
    }
    for (int r = 0; r < part.size(); ++r) {
        const double prob = mass[r] / total;
        const double se = std::sqrt(prob * (1.0 - prob) * N);
        CHECK(std::abs(count[r] - N * prob) <= 4.0 * se + 1.0);
    }
}

TEST_CASE("apply_coarsening flag edge cases and labels") {
    const Window w = Window::default_window();
    const Partition part = build_hex_partition(w, 1.5);
    Rng rng(44);
    const PointPattern pat = simulate_fixed_n(IntensityFunction::constant(1.0), w, 200, rng);

    const CoarseningFlags all1 =
        apply_coarsening(pat, std::vector<double>(200, 1.0), part, rng);
    CHECK(all1.n_observed() == 200);
    const CoarseningFlags all0 =
        apply_coarsening(pat, std::vector<double>(200, 0.0), part, rng);
    CHECK(all0.n_observed() == 0);
    for (int i = 0; i < 200; ++i) CHECK(all0.region[i] == part.locate(pat.points[i]));

    CHECK_THROWS(apply_coarsening(pat, std::vector<double>(200, 1.5), part, rng));
}

TEST_CASE("coarsening counts follow the binomial moments") {
    const Window w = Window::default_window();
    const Partition part = build_hex_partition(w, 1.5);
    Rng rng(55);
    const int n = 250;
    const PointPattern pat = simulate_fixed_n(IntensityFunction::constant(1.0), w, n, rng);
    const std::vector<double> phi(n, 0.4);  // observation probability

    const int reps = 1000;
    double sum_obs = 0.0;
    for (int k = 0; k < reps; ++k) {
        Rng rep = rng.derive(k);
        sum_obs += apply_coarsening(pat, phi, part, rep).n_observed();
    }
    const double mean_obs = sum_obs / reps;
    // observed ~ Binomial(250, 0.4), coarsened ~ Binomial(250, 0.6)
    const double se = std::sqrt(n * 0.4 * 0.6 / reps);
    CHECK(std::abs(mean_obs - n * 0.4) <= 3.0 * se);
    CHECK(std::abs((n - mean_obs) - n * 0.6) <= 3.0 * se);
}

TEST_CASE("propensity estimator is the per-region observed share") {
    // hand-built: unit square window, one region
    const Window sq(Polygon{{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    const Partition part = build_hex_partition(sq, 5.0);
    REQUIRE(part.size() == 1);

    CoarseningFlags flags;
    flags.observed = {1, 1, 1, 0};
    flags.region = {0, 0, 0, 0};
    const PropensityEstimate est = estimate_propensity(flags, part);
    CHECK(est.phi[0] == doctest::Approx(0.75).epsilon(1e-15));

    CoarseningFlags empty;
    CHECK_THROWS(estimate_propensity(empty, part));
}

TEST_CASE("propensity: occupied regions all observed -> 1; empty regions -> fallback") {
    const Window w = Window::default_window();
    const Partition part = build_hex_partition(w, 1.5);
    Rng rng(66);
    const PointPattern pat = simulate_fixed_n(IntensityFunction::constant(1.0), w, 40, rng);
    CoarseningFlags flags = apply_coarsening(pat, std::vector<double>(40, 1.0), part, rng);
    // flip a couple of units to coarsened so the fallback is not 1
    flags.observed[3] = 0;
    flags.observed[17] = 0;
    const PropensityEstimate est = estimate_propensity(flags, part);
    const double fallback = 38.0 / 40.0;
    std::vector<int> units(part.size(), 0);
    for (int i = 0; i < 40; ++i) ++units[flags.region[i]];
    for (int r = 0; r < part.size(); ++r) {
        if (units[r] == 0) CHECK(est.phi[r] == doctest::Approx(fallback).epsilon(1e-15));
        CHECK(est.phi[r] >= 0.0);
        CHECK(est.phi[r] <= 1.0);
    }
}

TEST_CASE("kernel intensity: value at an isolated point is the kernel peak") {
    const Window sq(Polygon{{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    KdeConfig cfg;
    cfg.bandwidth = 0.2;
    cfg.grid_nx = 128;
    cfg.grid_ny = 128;
    // place the point exactly at a cell centre
    const Point2 z{(64 + 0.5) / 128.0, (64 + 0.5) / 128.0};
    const IntensityField f = estimate_intensity({z}, {1.0}, sq, cfg);
    const double peak = 1.0 / (2.0 * 3.14159265358979323846 * 0.2 * 0.2);
    CHECK(f.at(64, 64) == doctest::Approx(peak).epsilon(1e-12));
}

TEST_CASE("kernel intensity errors") {
    const Window sq(Polygon{{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    KdeConfig bad;
    bad.bandwidth = -1.0;
    CHECK_THROWS(estimate_intensity({}, {}, sq));
    CHECK_THROWS(estimate_intensity({{0.5, 0.5}}, {0.0}, sq));
}

TEST_CASE("kernel intensity: constant propensity scales the field exactly") {
    const Window w = Window::default_window();
    Rng rng(77);
    const PointPattern pat = simulate_fixed_n(IntensityFunction::two_bump_default(), w, 120, rng);
    const IntensityField base =
        estimate_intensity(pat.points, std::vector<double>(120, 1.0), w);
    const IntensityField half =
        estimate_intensity(pat.points, std::vector<double>(120, 0.5), w);
    REQUIRE(base.value.size() == half.value.size());
    for (size_t i = 0; i < base.value.size(); ++i) CHECK(half.value[i] == 2.0 * base.value[i]);
}

TEST_CASE("kernel intensity: grid integral matches the in-window kernel mass oracle") {
    const Window w = Window::default_window();
    Rng rng(88);
    const int p = 150;
    const PointPattern pat = simulate_fixed_n(IntensityFunction::two_bump_default(), w, p, rng);
    KdeConfig cfg;
    cfg.grid_nx = 256;
    cfg.grid_ny = 256;
    const double h = default_bandwidth(pat.points);
    const IntensityField f = estimate_intensity(pat.points, std::vector<double>(p, 1.0), w, cfg);

    // oracle: total kernel mass minus the boundary leakage, by numerical
    // integration of each kernel over the window
    const double inv2h2 = 1.0 / (2.0 * h * h);
    const double norm = 1.0 / (2.0 * 3.14159265358979323846 * h * h);
    double oracle = 0.0;
    for (int i = 0; i < p; ++i) {
        const Point2 z = pat.points[i];
        oracle += testsupport::raster_integral(
            w.boundary(),
            [&](Point2 s) {
                const double dx = s.x - z.x, dy = s.y - z.y;
                return norm * std::exp(-(dx * dx + dy * dy) * inv2h2);
            },
            400);
    }
    CHECK(oracle < p);  // leakage is real
    CHECK(std::abs(f.integral() - oracle) / p < 0.02);
}

TEST_CASE("conditional sampler: constant field is uniform on a rectangular region") {
    const Window rect(Polygon{{0, 0}, {2, 0}, {2, 1}, {0, 1}});
    const Partition part = build_hex_partition(rect, 10.0);
    REQUIRE(part.size() == 1);
    IntensityField f = manual_field(64, 32, 0.0, 0.0, 2.0 / 64, 1.0 / 32,
                                    std::vector<double>(64 * 32, 3.7));
    const ConditionalSampler sampler(f, part);
    Rng rng(99);
    const int N = 10000;
    std::vector<double> ux, uy;
    for (int i = 0; i < N; ++i) {
        const Point2 s = sampler.sample_region(0, rng);
        ux.push_back(s.x / 2.0);
        uy.push_back(s.y);
    }
    CHECK(testsupport::ks_pvalue(testsupport::ks_statistic_uniform(ux), N) > 0.001);
    CHECK(testsupport::ks_pvalue(testsupport::ks_statistic_uniform(uy), N) > 0.001);
}

TEST_CASE("conditional sampler: two-cell region selects cells 1:3") {
    const Window rect(Polygon{{0, 0}, {2, 0}, {2, 1}, {0, 1}});
    const Partition part = build_hex_partition(rect, 10.0);
    IntensityField f = manual_field(2, 1, 0.0, 0.0, 1.0, 1.0, {1.0, 3.0});
    const ConditionalSampler sampler(f, part);
    Rng rng(111);
    const int N = 10000;
    int left = 0;
    for (int i = 0; i < N; ++i)
        if (sampler.sample_region(0, rng).x < 1.0) ++left;
    const double se = std::sqrt(0.25 * 0.75 * N);
    CHECK(std::abs(left - 0.25 * N) <= 3.0 * se);
}

TEST_CASE("conditional sampler: draws always land in their region") {
    const Window w = Window::default_window();
    const Partition part = build_hex_partition(w, 1.5);
    Rng rng(123);
    const PointPattern pat = simulate_fixed_n(IntensityFunction::two_bump_default(), w, 150, rng);
    const IntensityField f =
        estimate_intensity(pat.points, std::vector<double>(150, 1.0), w);
    const ConditionalSampler sampler(f, part);
    std::vector<int> labels;
    for (int r = 0; r < part.size(); ++r)
        for (int k = 0; k < 3; ++k) labels.push_back(r);
    for (int rep = 0; rep < 200; ++rep) {
        const std::vector<Point2> draws = sampler.sample(labels, rng);
        for (size_t i = 0; i < labels.size(); ++i)
            REQUIRE(part.locate(draws[i]) == labels[i]);
    }
}

TEST_CASE("conditional sampler: zero-mass region falls back to uniform") {
    const Window rect(Polygon{{0, 0}, {2, 0}, {2, 1}, {0, 1}});
    const Partition part = build_hex_partition(rect, 10.0);
    IntensityField f = manual_field(2, 1, 0.0, 0.0, 1.0, 1.0, {0.0, 0.0});
    const ConditionalSampler sampler(f, part);
    Rng rng(131);
    for (int i = 0; i < 100; ++i) {
        const Point2 s = sampler.sample_region(0, rng);
        CHECK(part.locate(s) == 0);
    }
}

TEST_CASE("conditional draws are independent across units") {
    const Window w = Window::default_window();
    const Partition part = build_hex_partition(w, 1.5);
    Rng rng(141);
    const PointPattern pat = simulate_fixed_n(IntensityFunction::two_bump_default(), w, 150, rng);
    const IntensityField f =
        estimate_intensity(pat.points, std::vector<double>(150, 1.0), w);
    const ConditionalSampler sampler(f, part);
    const int N = 4000;
    std::vector<double> x1(N), x2(N);
    const std::vector<int> labels{2, 7};
    for (int i = 0; i < N; ++i) {
        const auto draws = sampler.sample(labels, rng);
        x1[i] = draws[0].x;
        x2[i] = draws[1].x;
    }
    const double m1 = testsupport::mean_of(x1), m2 = testsupport::mean_of(x2);
    double cov = 0.0;
    for (int i = 0; i < N; ++i) cov += (x1[i] - m1) * (x2[i] - m2);
    cov /= (N - 1);
    const double corr =
        cov / std::sqrt(testsupport::variance_of(x1) * testsupport::variance_of(x2));
    CHECK(std::abs(corr) < 3.0 / std::sqrt(static_cast<double>(N)));
}

TEST_CASE("seeded pattern simulation is reproducible") {
    const Window w = Window::default_window();
    Rng a(171), b(171);
    const PointPattern p1 = simulate_fixed_n(IntensityFunction::two_bump_default(), w, 50, a);
    const PointPattern p2 = simulate_fixed_n(IntensityFunction::two_bump_default(), w, 50, b);
    for (int i = 0; i < 50; ++i) {
        CHECK(p1.points[i].x == p2.points[i].x);
        CHECK(p1.points[i].y == p2.points[i].y);
    }
}

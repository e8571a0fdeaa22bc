#include "slmc/point_process.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace slmc {

namespace {
constexpr double kTwoPi = 6.283185307179586;
}

int CoarseningFlags::n_observed() const {
    return static_cast<int>(std::count(observed.begin(), observed.end(), 1));
}

std::vector<int> CoarseningFlags::coarsened_regions() const {
    std::vector<int> out;
    for (int i = 0; i < n(); ++i)
        if (!observed[i]) out.push_back(region[i]);
    return out;
}

PointPattern simulate_fixed_n(const IntensityFunction& intensity, const Window& window, int n,
                              Rng& rng) {
    if (n < 0) throw std::invalid_argument("simulate_fixed_n: n must be >= 0");
    const double envelope = intensity.upper_bound();
    if (!(envelope > 0.0))
        throw std::runtime_error("simulate_fixed_n: intensity is identically zero");

    const BoundingBox& bb = window.bbox();
    PointPattern pattern;
    pattern.points.reserve(n);
    long long proposals = 0;
    const long long cap = 10000LL * (n + 1) + 1000000LL;
    while (pattern.n() < n) {
        if (++proposals > cap)
            throw std::runtime_error("simulate_fixed_n: rejection sampling failed to converge "
                                     "(envelope estimation failure?)");
        const Point2 s{rng.uniform(bb.xmin, bb.xmax), rng.uniform(bb.ymin, bb.ymax)};
        if (!window.contains(s)) continue;
        if (rng.uniform() * envelope <= intensity(s)) pattern.points.push_back(s);
    }
    return pattern;
}

CoarseningFlags apply_coarsening(const PointPattern& pattern, const std::vector<double>& phi,
                                 const Partition& partition, Rng& rng) {
    if (static_cast<int>(phi.size()) != pattern.n())
        throw std::invalid_argument("apply_coarsening: phi length mismatch");
    CoarseningFlags flags;
    flags.observed.resize(pattern.n());
    flags.region.resize(pattern.n());
    for (int i = 0; i < pattern.n(); ++i) {
        if (phi[i] < 0.0 || phi[i] > 1.0)
            throw std::invalid_argument("apply_coarsening: probability outside [0,1]");
        flags.observed[i] = rng.uniform() < phi[i] ? 1 : 0;
        flags.region[i] = partition.locate(pattern.points[i]);
    }
    return flags;
}

CoarseningFlags apply_coarsening(const PointPattern& pattern,
                                 const std::function<double(Point2)>& phi,
                                 const Partition& partition, Rng& rng) {
    std::vector<double> p(pattern.n());
    for (int i = 0; i < pattern.n(); ++i) p[i] = phi(pattern.points[i]);
    return apply_coarsening(pattern, p, partition, rng);
}

PropensityEstimate estimate_propensity(const CoarseningFlags& flags, const Partition& partition) {
    if (flags.n() == 0) throw std::invalid_argument("estimate_propensity: empty pattern");
    const int R = partition.size();
    std::vector<int> total(R, 0), obs(R, 0);
    for (int i = 0; i < flags.n(); ++i) {
        const int r = flags.region[i];
        if (r < 0 || r >= R) throw std::invalid_argument("estimate_propensity: bad region label");
        ++total[r];
        if (flags.observed[i]) ++obs[r];
    }
    PropensityEstimate est;
    est.fallback = static_cast<double>(flags.n_observed()) / flags.n();
    est.phi.resize(R);
    for (int r = 0; r < R; ++r)
        est.phi[r] = total[r] > 0 ? static_cast<double>(obs[r]) / total[r] : est.fallback;
    return est;
}

double default_bandwidth(const std::vector<Point2>& points) {
    const int n = static_cast<int>(points.size());
    if (n < 2) return 1.0;
    double mx = 0, my = 0;
    for (const Point2& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= n;
    my /= n;
    double vx = 0, vy = 0;
    for (const Point2& p : points) {
        vx += (p.x - mx) * (p.x - mx);
        vy += (p.y - my) * (p.y - my);
    }
    const double pooled = std::sqrt(0.5 * (vx + vy) / (n - 1));
    return std::pow(static_cast<double>(n), -1.0 / 6.0) * pooled;
}

IntensityField estimate_intensity(const std::vector<Point2>& observed_points,
                                  const std::vector<double>& weights, const Window& window,
                                  const KdeConfig& config) {
    const int n = static_cast<int>(observed_points.size());
    if (n == 0) throw std::invalid_argument("estimate_intensity: no observed points");
    if (weights.size() != observed_points.size())
        throw std::invalid_argument("estimate_intensity: weights length mismatch");
    const double h = config.bandwidth > 0.0 ? config.bandwidth
                                            : default_bandwidth(observed_points);
    if (!(h > 0.0)) throw std::invalid_argument("estimate_intensity: bandwidth must be > 0");
    for (double w : weights)
        if (!(w > 0.0))
            throw std::invalid_argument("estimate_intensity: propensity weights must be > 0");

    IntensityField f;
    f.nx = config.grid_nx;
    f.ny = config.grid_ny;
    if (f.nx < 2 || f.ny < 2) throw std::invalid_argument("estimate_intensity: grid too small");
    const BoundingBox& bb = window.bbox();
    f.x0 = bb.xmin;
    f.y0 = bb.ymin;
    f.dx = bb.width() / f.nx;
    f.dy = bb.height() / f.ny;
    f.value.assign(static_cast<size_t>(f.nx) * f.ny, 0.0);
    f.inside.assign(static_cast<size_t>(f.nx) * f.ny, 0);

    const double inv2h2 = 1.0 / (2.0 * h * h);
    const double norm = 1.0 / (kTwoPi * h * h);
    for (int iy = 0; iy < f.ny; ++iy) {
        for (int ix = 0; ix < f.nx; ++ix) {
            const size_t idx = static_cast<size_t>(iy) * f.nx + ix;
            const Point2 c = f.cell_center(ix, iy);
            if (!window.contains(c)) continue;
            f.inside[idx] = 1;
            double v = 0.0;
            for (int i = 0; i < n; ++i) {
                const double dx = c.x - observed_points[i].x;
                const double dy = c.y - observed_points[i].y;
                v += std::exp(-(dx * dx + dy * dy) * inv2h2) / weights[i];
            }
            f.value[idx] = v * norm;
        }
    }
    return f;
}

ConditionalSampler::ConditionalSampler(const IntensityField& field, const Partition& partition)
    : partition_(partition), field_(field) {
    const int R = partition.size();
    region_cells_.resize(R);
    region_cdf_.resize(R);
    region_mass_.assign(R, 0.0);
    for (int iy = 0; iy < field_.ny; ++iy) {
        for (int ix = 0; ix < field_.nx; ++ix) {
            const int idx = iy * field_.nx + ix;
            if (!field_.inside[idx]) continue;
            const int r = partition_.locate(field_.cell_center(ix, iy));
            region_cells_[r].push_back(idx);
        }
    }
    for (int r = 0; r < R; ++r) {
        double acc = 0.0;
        region_cdf_[r].reserve(region_cells_[r].size());
        for (int idx : region_cells_[r]) {
            acc += field_.value[idx];
            region_cdf_[r].push_back(acc);
        }
        region_mass_[r] = acc;
    }
}

Point2 ConditionalSampler::sample_region(int r, Rng& rng, bool jitter) const {
    if (r < 0 || r >= partition_.size())
        throw std::invalid_argument("sample_region: region index out of range");
    const auto& cells = region_cells_[r];
    if (!cells.empty() && region_mass_[r] > 0.0) {
        const auto& cdf = region_cdf_[r];
        const double u = rng.uniform() * region_mass_[r];
        const size_t k = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        const int idx = cells[std::min(k, cells.size() - 1)];
        const int ix = idx % field_.nx, iy = idx / field_.nx;
        const Point2 c = field_.cell_center(ix, iy);
        if (!jitter) return c;
        for (int attempt = 0; attempt < 64; ++attempt) {
            const Point2 p{c.x + (rng.uniform() - 0.5) * field_.dx,
                           c.y + (rng.uniform() - 0.5) * field_.dy};
            if (partition_.window().contains(p) && partition_.locate(p) == r) return p;
        }
        return c;  // cell centre is in the region by construction
    }
    // zero-mass region: uniform on the region polygon
    const Polygon& poly = partition_.region(r);
    BoundingBox bb;
    bb.xmin = bb.xmax = poly[0].x;
    bb.ymin = bb.ymax = poly[0].y;
    for (const Point2& p : poly) {
        bb.xmin = std::min(bb.xmin, p.x);
        bb.xmax = std::max(bb.xmax, p.x);
        bb.ymin = std::min(bb.ymin, p.y);
        bb.ymax = std::max(bb.ymax, p.y);
    }
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const Point2 p{rng.uniform(bb.xmin, bb.xmax), rng.uniform(bb.ymin, bb.ymax)};
        if (point_in_polygon(poly, p, 0.0) && partition_.window().contains(p) &&
            partition_.locate(p) == r)
            return p;
    }
    return partition_.centroid(r);
}

std::vector<Point2> ConditionalSampler::sample(const std::vector<int>& region_labels, Rng& rng,
                                               bool jitter) const {
    std::vector<Point2> out;
    out.reserve(region_labels.size());
    for (int r : region_labels) out.push_back(sample_region(r, rng, jitter));
    return out;
}

std::vector<Point2> sample_conditional_locations(const IntensityField& field,
                                                 const std::vector<int>& region_labels,
                                                 const Partition& partition, Rng& rng) {
    return ConditionalSampler(field, partition).sample(region_labels, rng);
}

std::vector<Point2> sample_pattern_from_field(const IntensityField& field, const Window& window,
                                              int n, Rng& rng) {
    std::vector<int> cells;
    std::vector<double> cdf;
    double acc = 0.0;
    for (int i = 0; i < field.cells(); ++i) {
        if (!field.inside[i] || field.value[i] <= 0.0) continue;
        cells.push_back(i);
        acc += field.value[i];
        cdf.push_back(acc);
    }
    if (cells.empty())
        throw std::runtime_error("sample_pattern_from_field: field has zero mass");
    std::vector<Point2> out;
    out.reserve(n);
    while (static_cast<int>(out.size()) < n) {
        const double u = rng.uniform() * acc;
        const size_t k = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        const int idx = cells[std::min(k, cells.size() - 1)];
        const Point2 c = field.cell_center(idx % field.nx, idx / field.nx);
        Point2 p = c;
        bool ok = false;
        for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
            p = {c.x + (rng.uniform() - 0.5) * field.dx, c.y + (rng.uniform() - 0.5) * field.dy};
            ok = window.contains(p);
        }
        out.push_back(ok ? p : c);
    }
    return out;
}

}  // namespace slmc

#pragma once

#include <functional>
#include <vector>

#include "slmc/geometry.hpp"
#include "slmc/intensity.hpp"
#include "slmc/rng.hpp"

namespace slmc {

struct PointPattern {
    std::vector<Point2> points;
    int n() const { return static_cast<int>(points.size()); }
};

/// Per-unit geocoding outcome. observed[i] == 1 means the exact location is
/// known; region[i] is filled for every unit (for observed units it is
/// derived from the location).
struct CoarseningFlags {
    std::vector<unsigned char> observed;
    std::vector<int> region;

    int n() const { return static_cast<int>(observed.size()); }
    int n_observed() const;
    int n_coarsened() const { return n() - n_observed(); }
    std::vector<int> coarsened_regions() const;
};

/// Region-wise geocoding propensity estimate: the share of observed units in
/// each region; regions with no units fall back to the overall share.
struct PropensityEstimate {
    std::vector<double> phi;
    double fallback = 1.0;

    double at_region(int r) const { return phi[r]; }
};

/// Draw n points i.i.d. from the density lambda(s) / integral(lambda) by
/// rejection sampling over the window bounding box.
PointPattern simulate_fixed_n(const IntensityFunction& intensity, const Window& window, int n,
                              Rng& rng);

/// Independent Bernoulli geocoding flags; phi[i] is the probability that
/// unit i is observed. Region labels are filled for all units.
CoarseningFlags apply_coarsening(const PointPattern& pattern, const std::vector<double>& phi,
                                 const Partition& partition, Rng& rng);
CoarseningFlags apply_coarsening(const PointPattern& pattern,
                                 const std::function<double(Point2)>& phi,
                                 const Partition& partition, Rng& rng);

PropensityEstimate estimate_propensity(const CoarseningFlags& flags, const Partition& partition);

struct KdeConfig {
    double bandwidth = 0.0;  // <= 0: Scott-like rule n_obs^(-1/6) * pooled sd
    int grid_nx = 128;
    int grid_ny = 128;
};

/// Propensity-weighted Gaussian kernel intensity estimate on a grid over the
/// window bounding box. weights[i] is the propensity attached to observed
/// point i; each point contributes with mass 1/weights[i]. No edge
/// correction is applied.
IntensityField estimate_intensity(const std::vector<Point2>& observed_points,
                                  const std::vector<double>& weights, const Window& window,
                                  const KdeConfig& config = {});

double default_bandwidth(const std::vector<Point2>& points);

/// Samples locations for coarsened units from the estimated intensity
/// restricted to their regions: inverse-CDF over the grid cells of the
/// region followed by a uniform jitter inside the chosen cell. Regions whose
/// restricted field has zero mass fall back to a uniform draw on the region.
class ConditionalSampler {
public:
    ConditionalSampler(const IntensityField& field, const Partition& partition);

    Point2 sample_region(int r, Rng& rng, bool jitter = true) const;
    std::vector<Point2> sample(const std::vector<int>& region_labels, Rng& rng,
                               bool jitter = true) const;

private:
    Partition partition_;
    IntensityField field_;
    std::vector<std::vector<int>> region_cells_;   // cell ids per region
    std::vector<std::vector<double>> region_cdf_;  // cumulative cell masses
    std::vector<double> region_mass_;
};

std::vector<Point2> sample_conditional_locations(const IntensityField& field,
                                                 const std::vector<int>& region_labels,
                                                 const Partition& partition, Rng& rng);

/// Draw n points from the gridded field over the whole window (cell-level
/// inverse CDF plus in-window jitter).
std::vector<Point2> sample_pattern_from_field(const IntensityField& field, const Window& window,
                                              int n, Rng& rng);

}  // namespace slmc

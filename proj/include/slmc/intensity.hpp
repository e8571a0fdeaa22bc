#pragma once

#include <vector>

#include "slmc/geometry.hpp"

namespace slmc {

struct GaussianBump {
    double weight = 1.0;  // peak height
    Point2 center;
    double tau = 1.0;  // spread
};

/// Nonnegative intensity surface: a constant baseline plus Gaussian bumps.
class IntensityFunction {
public:
    IntensityFunction(double baseline, std::vector<GaussianBump> bumps);

    static IntensityFunction constant(double level);

    /// Default surface used by the simulation scenarios: two bumps over the
    /// default window, dynamic range roughly 5:1.
    static IntensityFunction two_bump_default();

    double operator()(Point2 s) const;

    /// Upper bound of the intensity over any region (baseline plus all peak
    /// heights); used as the rejection-sampling envelope.
    double upper_bound() const;

    double baseline() const { return baseline_; }
    const std::vector<GaussianBump>& bumps() const { return bumps_; }

private:
    double baseline_;
    std::vector<GaussianBump> bumps_;
};

/// Gridded intensity estimate over the window bounding box. Cells are
/// row-major (iy * nx + ix) with centres at (x0 + (ix+0.5)dx, y0 + (iy+0.5)dy).
/// Cells whose centre falls outside the window are masked and carry value 0.
struct IntensityField {
    int nx = 0, ny = 0;
    double x0 = 0, y0 = 0, dx = 0, dy = 0;
    std::vector<double> value;
    std::vector<unsigned char> inside;

    int cells() const { return nx * ny; }
    double cell_area() const { return dx * dy; }
    Point2 cell_center(int ix, int iy) const {
        return {x0 + (ix + 0.5) * dx, y0 + (iy + 0.5) * dy};
    }
    double at(int ix, int iy) const { return value[static_cast<size_t>(iy) * nx + ix]; }

    /// Integral of the field over the masked-in cells.
    double integral() const;

    /// Cell index containing the point, clamped to the grid.
    int cell_index(Point2 p) const;
};

}  // namespace slmc

#include "slmc/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slmc {

IntensityFunction::IntensityFunction(double baseline, std::vector<GaussianBump> bumps)
    : baseline_(baseline), bumps_(std::move(bumps)) {
    if (baseline_ < 0.0) throw std::invalid_argument("intensity: negative baseline");
    for (const auto& b : bumps_) {
        if (b.weight < 0.0 || b.tau <= 0.0)
            throw std::invalid_argument("intensity: bump weight must be >= 0 and tau > 0");
    }
}

IntensityFunction IntensityFunction::constant(double level) {
    return IntensityFunction(level, {});
}

IntensityFunction IntensityFunction::two_bump_default() {
    return IntensityFunction(0.25, {GaussianBump{1.0, {3.2, 7.2}, 1.6},
                                    GaussianBump{0.9, {4.0, 1.5}, 1.4}});
}

double IntensityFunction::operator()(Point2 s) const {
    double v = baseline_;
    for (const auto& b : bumps_) {
        const double dx = s.x - b.center.x, dy = s.y - b.center.y;
        v += b.weight * std::exp(-0.5 * (dx * dx + dy * dy) / (b.tau * b.tau));
    }
    return v;
}

double IntensityFunction::upper_bound() const {
    double v = baseline_;
    for (const auto& b : bumps_) v += b.weight;
    return v;
}

double IntensityField::integral() const {
    double s = 0.0;
    for (int i = 0; i < cells(); ++i)
        if (inside[i]) s += value[i];
    return s * cell_area();
}

int IntensityField::cell_index(Point2 p) const {
    int ix = static_cast<int>((p.x - x0) / dx);
    int iy = static_cast<int>((p.y - y0) / dy);
    ix = std::clamp(ix, 0, nx - 1);
    iy = std::clamp(iy, 0, ny - 1);
    return iy * nx + ix;
}

}  // namespace slmc

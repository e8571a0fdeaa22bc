#pragma once

// Shared statistical oracles for the test suites. Everything here is
// implemented independently of the library code it is used to check.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "slmc/geometry.hpp"

namespace testsupport {

// Regularised upper incomplete gamma Q(a, x) (series + continued fraction).
inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        // lower series
        double ap = a, sum = 1.0 / a, del = sum;
        for (int n = 0; n < 500; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-14) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
    }
    // continued fraction
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-14) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

/// Chi-square upper-tail p-value.
inline double chi2_pvalue(double stat, int dof) { return gamma_q(0.5 * dof, 0.5 * stat); }

/// Kolmogorov-Smirnov asymptotic p-value for a one-sample statistic d with n
/// observations.
inline double ks_pvalue(double d, int n) {
    const double lam = (std::sqrt(static_cast<double>(n)) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lam * lam);
        sum += term;
        if (std::abs(term) < 1e-12) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

inline double ks_statistic_uniform(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    const int n = static_cast<int>(u.size());
    double d = 0.0;
    for (int i = 0; i < n; ++i) {
        d = std::max(d, std::abs((i + 1.0) / n - u[i]));
        d = std::max(d, std::abs(u[i] - static_cast<double>(i) / n));
    }
    return d;
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
}

inline double variance_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
}

/// Numeric polygon mass centroid by fine rasterisation; independent of the
/// shoelace formulas in the library.
inline slmc::Point2 raster_centroid(const slmc::Polygon& poly, int res = 800) {
    double xmin = poly[0].x, xmax = poly[0].x, ymin = poly[0].y, ymax = poly[0].y;
    for (const auto& p : poly) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const double dx = (xmax - xmin) / res, dy = (ymax - ymin) / res;
    double cnt = 0, sx = 0, sy = 0;
    for (int iy = 0; iy < res; ++iy) {
        for (int ix = 0; ix < res; ++ix) {
            const slmc::Point2 c{xmin + (ix + 0.5) * dx, ymin + (iy + 0.5) * dy};
            if (slmc::point_in_polygon(poly, c, 0.0)) {
                cnt += 1;
                sx += c.x;
                sy += c.y;
            }
        }
    }
    if (cnt == 0) throw std::runtime_error("raster_centroid: empty polygon");
    return {sx / cnt, sy / cnt};
}

/// Numeric integral of a function over a polygon by rasterisation.
template <typename F>
double raster_integral(const slmc::Polygon& poly, F&& f, int res = 600) {
    double xmin = poly[0].x, xmax = poly[0].x, ymin = poly[0].y, ymax = poly[0].y;
    for (const auto& p : poly) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const double dx = (xmax - xmin) / res, dy = (ymax - ymin) / res;
    double acc = 0;
    for (int iy = 0; iy < res; ++iy)
        for (int ix = 0; ix < res; ++ix) {
            const slmc::Point2 c{xmin + (ix + 0.5) * dx, ymin + (iy + 0.5) * dy};
            if (slmc::point_in_polygon(poly, c, 0.0)) acc += f(c);
        }
    return acc * dx * dy;
}

}  // namespace testsupport

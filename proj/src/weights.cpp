#include "slmc/weights.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace slmc {

KappaSpec KappaSpec::threshold(double t) {
    if (!(t > 0.0)) throw std::invalid_argument("kappa: threshold must be positive");
    KappaSpec k;
    k.is_threshold_ = true;
    k.threshold_ = t;
    k.support_ = t;
    k.fn_ = [t](double d) { return d <= t ? 1.0 : 0.0; };
    return k;
}

KappaSpec KappaSpec::custom(std::function<double(double)> fn, double support) {
    KappaSpec k;
    k.fn_ = std::move(fn);
    k.support_ = support;
    return k;
}

namespace {

// Uniform-grid bucket index for neighbour search with cell size = support.
struct BucketKey {
    long long v;
    bool operator==(const BucketKey& o) const { return v == o.v; }
};
struct BucketHash {
    size_t operator()(const BucketKey& k) const { return std::hash<long long>()(k.v); }
};
BucketKey bucket_of(Point2 p, double cell) {
    const long long bx = static_cast<long long>(std::floor(p.x / cell));
    const long long by = static_cast<long long>(std::floor(p.y / cell));
    return BucketKey{(bx << 32) ^ (by & 0xffffffffLL)};
}

}  // namespace

WeightMatrix build_weight_matrix(const std::vector<Point2>& points, const KappaSpec& kappa,
                                 bool standardise) {
    const int n = static_cast<int>(points.size());
    if (n < 1) throw std::invalid_argument("build_weight_matrix: need at least one point");

    std::vector<Eigen::Triplet<double>> trips;
    if (kappa.support() > 0.0 && n > 64) {
        const double cell = kappa.support();
        std::unordered_map<BucketKey, std::vector<int>, BucketHash> grid;
        for (int i = 0; i < n; ++i) grid[bucket_of(points[i], cell)].push_back(i);
        for (int i = 0; i < n; ++i) {
            const long long bx = static_cast<long long>(std::floor(points[i].x / cell));
            const long long by = static_cast<long long>(std::floor(points[i].y / cell));
            for (long long ox = -1; ox <= 1; ++ox) {
                for (long long oy = -1; oy <= 1; ++oy) {
                    const BucketKey key{((bx + ox) << 32) ^ ((by + oy) & 0xffffffffLL)};
                    auto it = grid.find(key);
                    if (it == grid.end()) continue;
                    for (int j : it->second) {
                        if (j == i) continue;
                        const double d = distance(points[i], points[j]);
                        if (d > kappa.support()) continue;
                        const double w = kappa(d);
                        if (w > 0.0) trips.emplace_back(i, j, w);
                    }
                }
            }
        }
    } else {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const double w = kappa(distance(points[i], points[j]));
                if (w > 0.0) trips.emplace_back(i, j, w);
            }
        }
    }

    WeightMatrix wm;
    wm.w.resize(n, n);
    wm.w.setFromTriplets(trips.begin(), trips.end());
    wm.row_standardised = standardise;
    if (standardise) {
        Eigen::VectorXd rowsum = Eigen::VectorXd::Zero(n);
        for (int k = 0; k < wm.w.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(wm.w, k); it; ++it)
                rowsum[it.row()] += it.value();
        for (int k = 0; k < wm.w.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(wm.w, k); it; ++it)
                if (rowsum[it.row()] > 0.0) it.valueRef() /= rowsum[it.row()];
    }
    wm.w.makeCompressed();
    return wm;
}

}  // namespace slmc

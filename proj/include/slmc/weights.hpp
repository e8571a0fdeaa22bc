#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <vector>

#include "slmc/geometry.hpp"

namespace slmc {

/// Non-increasing proximity function kappa: distance -> weight.
class KappaSpec {
public:
    /// Indicator kernel 1{x <= t}.
    static KappaSpec threshold(double t);
    /// Arbitrary non-increasing nonnegative function vanishing at infinity;
    /// `support` bounds the distance beyond which kappa is treated as zero
    /// (0 = unbounded, forces a dense pass).
    static KappaSpec custom(std::function<double(double)> fn, double support = 0.0);

    double operator()(double d) const { return fn_(d); }
    bool is_threshold() const { return is_threshold_; }
    double threshold_value() const { return threshold_; }
    double support() const { return support_; }

private:
    KappaSpec() = default;
    std::function<double(double)> fn_;
    bool is_threshold_ = false;
    double threshold_ = 0.0;
    double support_ = 0.0;
};

/// Spatial weight matrix with zero diagonal; optionally row-standardised
/// (rows with zero sum are left as zeros).
struct WeightMatrix {
    Eigen::SparseMatrix<double> w;
    bool row_standardised = false;

    int n() const { return static_cast<int>(w.rows()); }
};

WeightMatrix build_weight_matrix(const std::vector<Point2>& points, const KappaSpec& kappa,
                                 bool standardise);

}  // namespace slmc

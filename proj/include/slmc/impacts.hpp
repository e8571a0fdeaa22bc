#pragma once

#include <Eigen/Dense>
#include <vector>

#include "slmc/estimators.hpp"
#include "slmc/weights.hpp"

namespace slmc {

/// Average total, direct and indirect effect of one regressor; the indirect
/// effect is defined as total minus direct, so T = D + M holds exactly.
struct ImpactTriple {
    double total = 0.0;
    double direct = 0.0;
    double indirect = 0.0;
};

/// Exact impacts from (I - rho W)^-1: total via one linear solve against the
/// ones vector, direct via the trace of the inverse.
ImpactTriple impacts_exact(double rho, double beta_k, const WeightMatrix& w);

/// Truncated Neumann series: sum_{h=0..m} rho^h W^h v by repeated sparse
/// products (Horner form).
Eigen::VectorXd truncated_inverse_apply(double rho, const WeightMatrix& w, int m,
                                        const Eigen::VectorXd& v);

/// trace(sum_{h=0..m} rho^h W^h): exact column probing up to n = 1000,
/// Rademacher trace estimation above.
double truncated_inverse_trace(double rho, const WeightMatrix& w, int m, Rng* rng = nullptr);

struct McImpactConfig {
    int replicates = 50;      // N weight-matrix draws
    int truncation = 30;      // m
    bool redraw_all = false;  // redraw the full pattern instead of only the
                              // coarsened locations
    std::uint64_t seed = 1;
};

struct McImpacts {
    std::vector<ImpactTriple> per_regressor;
    int used = 0;
    int skipped = 0;
};

/// Monte Carlo impacts under location uncertainty: weight matrices are
/// rebuilt from conditional draws of the coarsened locations (or full
/// redraws from the estimated intensity) and the truncated-series averages
/// are accumulated.
McImpacts impacts_mc(const SlmParams& params, const CoarsenedDataset& data,
                     const IntensityField& field, const KappaSpec& kappa,
                     const McImpactConfig& config);

}  // namespace slmc

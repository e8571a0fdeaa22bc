#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "slmc/point_process.hpp"
#include "slmc/slm.hpp"
#include "slmc/weights.hpp"

namespace slmc {

/// Estimation input: responses and covariates for all units, exact
/// coordinates for observed units, region labels for coarsened units.
/// true_points carries the full pattern when the data come from a
/// simulation; it is consumed only by the oracle NCM method.
struct CoarsenedDataset {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
    std::vector<Point2> coords;  // meaningful where flags.observed[i] == 1
    CoarseningFlags flags;
    Partition partition;
    std::optional<std::vector<Point2>> true_points;

    int n() const { return static_cast<int>(y.size()); }
    std::vector<Point2> observed_coords() const;
};

struct EstimateResult {
    SlmParams params;
    std::string method;
    bool converged = true;
    int iterations = 0;
    double objective = 0.0;
    double seconds = 0.0;
};

class EstimationError : public std::runtime_error {
public:
    explicit EstimationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Maximum likelihood for the SLM via the concentrated likelihood: beta and
/// sigma2 profile out in closed form, the concentrated objective is
/// maximised over rho by bracketed golden-section plus parabolic refinement.
EstimateResult fit_ml(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const WeightMatrix& w);

/// Oracle fit on the true locations of all units (simulation only).
EstimateResult fit_ncm(const CoarsenedDataset& data, const Partition& partition,
                       const KappaSpec& kappa);
/// Observed units only, weight matrix not standardised.
EstimateResult fit_rem(const CoarsenedDataset& data, const Partition& partition,
                       const KappaSpec& kappa);
/// Observed units only, row-standardised weight matrix.
EstimateResult fit_srem(const CoarsenedDataset& data, const Partition& partition,
                        const KappaSpec& kappa);
/// All units, coarsened locations imputed to region centroids,
/// row-standardised weight matrix.
EstimateResult fit_cip(const CoarsenedDataset& data, const Partition& partition,
                       const KappaSpec& kappa);

/// Monte Carlo estimate of the location-marginalised log-likelihood:
/// log-mean-exp over M conditional draws of the coarsened locations.
double mc_marginal_loglik(const SlmParams& params, const CoarsenedDataset& data,
                          const IntensityField& field, const KappaSpec& kappa, int draws,
                          Rng& rng);

struct DmeConfig {
    int draws_per_eval = 32;        // M
    int population = 100;           // CE candidates per iteration
    double elite_fraction = 0.1;
    double smoothing = 0.8;
    int max_iters = 100;
    double variance_tolerance = 0.005;
    double bandwidth_override = 0.0;  // <= 0: default bandwidth rule
    int grid_nx = 128, grid_ny = 128;
    std::uint64_t seed = 1;
    int workers = 1;  // parallel candidate scoring inside an iteration

    void validate() const;
};

/// Per-iteration diagnostics of the cross-entropy loop.
struct DmeTrace {
    std::vector<double> elite_mean_objective;
    std::vector<double> max_instrumental_sd;
};

/// Double-marginalisation estimator: propensity + intensity estimation, then
/// cross-entropy optimisation of the noisy marginal likelihood over
/// (atanh(rho), beta, log sigma) with independent Gaussian instrumental
/// distributions and common random numbers within each iteration.
EstimateResult fit_dme(const CoarsenedDataset& data, const Partition& partition,
                       const KappaSpec& kappa, const DmeConfig& config,
                       DmeTrace* trace = nullptr);

/// Internals shared with the impact estimator and tests.
namespace detail {

/// Marginal log-likelihood averaged over explicit location draws.
double marginal_loglik_given_draws(const SlmParams& params, const CoarsenedDataset& data,
                                   const KappaSpec& kappa,
                                   const std::vector<std::vector<Point2>>& draws);

/// Full point vector: observed coordinates in place, draws for coarsened.
std::vector<Point2> merge_locations(const CoarsenedDataset& data,
                                    const std::vector<Point2>& coarsened_locations);

/// Steps 1 of the DME: propensity + weighted kernel intensity.
IntensityField dme_intensity(const CoarsenedDataset& data, const DmeConfig& config);

}  // namespace detail

}  // namespace slmc

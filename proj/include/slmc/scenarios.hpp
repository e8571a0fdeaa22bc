#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slmc/estimators.hpp"
#include "slmc/impacts.hpp"
#include "slmc/intensity.hpp"

namespace slmc {

enum class CoarseningKind {
    Constant,          // every unit coarsened with the same probability
    IntensityLinked,   // coarsening probability increases with the intensity
    IntensityInverse,  // coarsening probability decreases with the intensity
};

struct CoarseningSpec {
    CoarseningKind kind = CoarseningKind::Constant;
    double probability = 0.4;  // constant coarsening probability
    double mean = 0.4;         // target pattern-average coarsening probability
    double range_lo = 0.2, range_hi = 0.75;
    double factor = 0.8;  // proportionality factor applied to the intensity

    /// Per-unit coarsening probabilities for a realised pattern.
    std::vector<double> coarsening_probabilities(const std::vector<double>& lambda_at_points)
        const;
};

enum class Scale { Desk, Paper };

struct ScenarioConfig {
    std::string id = "A";
    int n = 250;
    double rho = 0.5;
    Eigen::VectorXd beta;  // includes the intercept
    double sigma2 = 1.0;
    double hex_side = 1.5;
    double kappa_threshold = 0.5;
    CoarseningSpec coarsening;
    int replications = 300;
    std::uint64_t base_seed = 1;

    std::vector<Point2> window_vertices;  // empty: library default window
    double intensity_baseline = 0.25;
    std::vector<GaussianBump> intensity_bumps;  // empty: library default bumps

    DmeConfig dme;
    int impact_mc_replicates = 100;
    int impact_truncation = 30;

    Window make_window() const;
    IntensityFunction make_intensity() const;
};

/// The eight simulation scenarios at their published (paper-scale) settings.
std::vector<ScenarioConfig> scenario_catalog();

/// Scenario by id ("A".."H"), throws for unknown ids.
ScenarioConfig scenario_by_id(const std::string& id);

/// Apply the run scale: desk shrinks the replication count and the DME
/// effort so a scenario finishes on a desktop.
ScenarioConfig apply_scale(ScenarioConfig config, Scale scale);

struct MetricsCell {
    double rmse = 0.0;  // relative RMSE x100
    double bias = 0.0;  // relative bias x100
};

struct MetricsTable {
    std::string scenario;
    std::vector<std::string> methods;
    std::vector<std::string> quantities;
    std::vector<std::vector<MetricsCell>> cells;  // [method][quantity]
    std::vector<int> used, skipped;               // per method
    int replications = 0;
    std::uint64_t seed = 0;
    double seconds = 0.0;

    const MetricsCell& at(const std::string& method, const std::string& quantity) const;
};

class ScenarioError : public std::runtime_error {
public:
    explicit ScenarioError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A method failed in more than 20% of the replications.
class SkipRateError : public ScenarioError {
public:
    explicit SkipRateError(const std::string& msg) : ScenarioError(msg) {}
};

/// 100 * mean(est - truth) / |truth| and 100 * rmse / |truth|.
MetricsCell relative_metrics(const std::vector<double>& estimates, double truth);

/// Run one scenario: one shared point pattern and design matrix, fresh noise
/// and coarsening per replication, every requested method fitted per
/// replication. Throws ScenarioError when any method skips more than 20% of
/// replications.
MetricsTable run_scenario(const ScenarioConfig& config, const std::vector<std::string>& methods,
                          int workers = 1);

/// Per-replication estimates (used by run_scenario and by tests that need
/// the raw draws).
struct ReplicationEstimates {
    std::vector<std::string> methods;
    // [method][quantity][replication]; quantity order matches MetricsTable
    std::vector<std::vector<std::vector<double>>> draws;
    std::vector<int> skipped;
    std::vector<std::string> quantities;
    std::vector<double> truths;
};

ReplicationEstimates run_scenario_raw(const ScenarioConfig& config,
                                      const std::vector<std::string>& methods, int workers = 1);

}  // namespace slmc

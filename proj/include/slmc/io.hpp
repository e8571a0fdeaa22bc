#pragma once

#include <string>
#include <vector>

#include "json.hpp"  // vendored nlohmann/json

#include "slmc/estimators.hpp"
#include "slmc/impacts.hpp"
#include "slmc/scenarios.hpp"

namespace slmc::io {

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// 6 significant digits; the format of every numeric cell we emit.
std::string fmt(double v);

// ---- points / flags -------------------------------------------------------

struct PointsFile {
    std::vector<Point2> points;
    CoarseningFlags flags;
    bool has_all_coords = true;  // oracle coordinates present for every unit
};

/// id,x,y,observed,region. Coordinates of coarsened units are written only
/// when `include_coarsened_coords` (simulation oracle output).
void write_points_csv(const std::string& path, const std::vector<Point2>& points,
                      const CoarseningFlags& flags, bool include_coarsened_coords);
PointsFile read_points_csv(const std::string& path);

void write_flags_csv(const std::string& path, const CoarseningFlags& flags);

// ---- dataset (y, X) -------------------------------------------------------

struct DatasetFile {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
};

void write_dataset_csv(const std::string& path, const Eigen::VectorXd& y,
                       const Eigen::MatrixXd& x);
DatasetFile read_dataset_csv(const std::string& path);

// ---- partition ------------------------------------------------------------

void write_partition_json(const std::string& path, const Partition& partition);
/// Rebuilds the partition from the stored window and side; the stored
/// regions are checked against the rebuilt ones.
Partition read_partition_json(const std::string& path);

// ---- intensity field ------------------------------------------------------

void write_field_csv(const std::string& path, const IntensityField& field);
void write_field_json(const std::string& path, const IntensityField& field);
IntensityField read_field_json(const std::string& path);

// ---- weight matrix --------------------------------------------------------

void write_weights_csv(const std::string& path, const WeightMatrix& w);

// ---- estimates ------------------------------------------------------------

struct EstimateRow {
    EstimateResult result;
    ImpactTriple impacts_beta1;  // for the first non-intercept regressor
    bool has_impacts = false;
};

void write_estimates_csv(const std::string& path, const std::vector<EstimateRow>& rows);

// ---- metrics table --------------------------------------------------------

void write_metrics_csv(const std::string& path, const MetricsTable& table);
nlohmann::json metrics_to_json(const MetricsTable& table);
void write_metrics_json(const std::string& path, const MetricsTable& table,
                        const nlohmann::json& metadata);

// ---- run configuration ----------------------------------------------------

/// Rejects unknown keys anywhere in the document.
void validate_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed,
                   const std::string& context);

DmeConfig dme_from_json(const nlohmann::json& j, DmeConfig base);

/// Scenario overrides from a config document (window, intensity, dme,
/// replications, seed...).
ScenarioConfig scenario_from_json(const nlohmann::json& j, ScenarioConfig base);

nlohmann::json load_json(const std::string& path);

}  // namespace slmc::io

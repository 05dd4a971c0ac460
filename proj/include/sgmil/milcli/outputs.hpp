#pragma once

#include <filesystem>
#include <string>

#include "sgmil/milcli/config.hpp"
#include "sgmil/milcli/experiment.hpp"

namespace sgmil::milcli {

/// Per-run rows, followed by AGG rows when the table comes from a sweep.
std::string metrics_csv(const ResultTable& table, bool wall_clock);

/// Configuration, seeds, tool versions and per-run details.
std::string manifest_json(const ExperimentConfig& cfg, const ResultTable& table);

/// Line chart of one aggregate metric ("auc" or "iou") against the sweep axis.
std::string metric_svg(const ResultTable& table, const std::string& metric);

/// Writes metrics.csv, manifest.json and (for sweeps) one SVG per metric into `dir`.
/// Refuses to touch an existing metrics.csv unless `force` is set. Files are written to a
/// temporary name first and renamed into place.
void emit_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg, const ResultTable& table, bool force);

}  // namespace sgmil::milcli

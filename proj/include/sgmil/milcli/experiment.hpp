#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "sgmil/bagdata/bags.hpp"
#include "sgmil/milcli/config.hpp"

namespace sgmil::milcli {

struct RunRecord {
    std::string config_hash;
    std::string axis_value;  // empty outside sweeps
    std::uint64_t seed = 0;
    std::vector<double> epoch_loss;
    double test_auc = std::numeric_limits<double>::quiet_NaN();
    double test_iou = std::numeric_limits<double>::quiet_NaN();
    double localization_accuracy = std::numeric_limits<double>::quiet_NaN();  // grid corpora only
    double wall_seconds = 0.0;

    double final_train_loss() const {
        return epoch_loss.empty() ? std::numeric_limits<double>::quiet_NaN() : epoch_loss.back();
    }
};

struct AggregateRow {
    std::string axis_value;
    double mean_auc = 0.0, min_auc = 0.0, max_auc = 0.0;
    double mean_iou = 0.0, min_iou = 0.0, max_iou = 0.0;
};

struct ResultTable {
    std::string axis;  // empty for a plain run
    std::vector<RunRecord> runs;
    std::vector<AggregateRow> aggregates;
};

using LogFn = std::function<void(const std::string&)>;

/// Image corpora are read once and shared between runs.
class CorpusCache {
public:
    const bagdata::Corpus& get(const ExperimentConfig& cfg);

private:
    std::string key_;
    std::unique_ptr<bagdata::Corpus> corpus_;
};

struct RunData {
    std::vector<Bag> train;
    std::vector<Bag> test;
    std::vector<bagdata::GridSample> grid_test;  // synthetic_grid only, parallel to `test`
};

RunData build_run_data(const ExperimentConfig& cfg, std::uint64_t seed, CorpusCache& cache);

/// Trains one model from scratch and evaluates it. Throws NumericError naming the epoch if
/// the loss becomes non-finite.
RunRecord run_single(const ExperimentConfig& cfg, std::uint64_t seed, CorpusCache& cache, const LogFn& log = {});

ResultTable run_experiment(const ExperimentConfig& cfg, const LogFn& log = {});

ResultTable run_sweep(const ExperimentConfig& base, const std::string& axis, const std::vector<std::string>& values,
                      const LogFn& log = {});

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& runs);

}  // namespace sgmil::milcli

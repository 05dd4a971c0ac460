#pragma once

// Experiment configuration. Files are flat `key = value` text with `#` comments; keys are
// the dot-separated field paths listed by config_keys().

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sgmil/bagdata/bags.hpp"
#include "sgmil/diffnet/optim.hpp"
#include "sgmil/evalkit.hpp"
#include "sgmil/pooling.hpp"
#include "sgmil/sgloss.hpp"

namespace sgmil::milcli {

struct ExperimentConfig {
    bagdata::BagRecipe recipe;  // template for both splits; bag_count / split / seed are set per run
    std::size_t train_bags = 150;
    std::size_t test_bags = 500;
    std::string data_dir = "data/mnist";
    std::size_t classes = 1;  // synthetic grid only; image corpora are single-class
    std::size_t grid_height = 8;
    std::size_t grid_width = 8;
    std::size_t grid_features = 16;

    std::string backbone = "lenet5-mil";
    pooling::PoolingSpec pooling;
    sgloss::LossKind loss = sgloss::LossKind::sgl;
    sgloss::SGLConfig sgl;
    diffnet::OptimizerConfig optimizer;
    std::size_t epochs = 40;
    std::vector<std::uint64_t> seeds{1, 2, 3};

    evalkit::LocalizationConfig localization;

    std::string output_dir = "out";
    bool wall_clock = false;  // write measured seconds into the CSV (breaks byte-for-byte reruns)

    void validate() const;
};

/// Parses `key = value` lines. Throws ConfigError with the line number on malformed input.
std::map<std::string, std::string> parse_key_values(std::string_view text);

/// Builds a config from defaults plus the given entries. Unknown keys are rejected.
ExperimentConfig make_config(const std::map<std::string, std::string>& entries);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets one field from its textual form (used for sweeps and command-line overrides).
void set_field(ExperimentConfig& cfg, std::string_view key, std::string_view value);

std::vector<std::string> config_keys();

/// Every field in canonical textual form, sorted by key.
std::map<std::string, std::string> canonical_entries(const ExperimentConfig& cfg);

/// FNV-1a over the canonical entries (output.* excluded), as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

std::string format_real(double v);

}  // namespace sgmil::milcli

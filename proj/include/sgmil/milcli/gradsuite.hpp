#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sgmil::milcli {

struct GradSuiteEntry {
    std::string component;   // e.g. "layer/conv2d", "pool/lse", "loss/sgl"
    std::size_t trials = 0;
    double max_relative_error = 0.0;
};

struct GradSuiteOptions {
    std::size_t trials = 100;
    std::uint64_t seed = 7;
    double eps = 1e-5;
};

/// Central-difference checks of every layer, pooling operator and loss on random inputs.
std::vector<GradSuiteEntry> run_gradient_suite(const GradSuiteOptions& options = {});

}  // namespace sgmil::milcli

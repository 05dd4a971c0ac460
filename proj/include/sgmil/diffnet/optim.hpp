#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sgmil/diffnet/backbone.hpp"

namespace sgmil::diffnet {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 5e-4;
    double weight_decay = 1e-4;  // L2 term added to the gradient before the update
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

struct OptimizerState {
    OptimizerConfig config;
    std::uint64_t step = 0;
    std::vector<Tensor> first_moment;   // Adam m, one per parameter
    std::vector<Tensor> second_moment;  // Adam v

    explicit OptimizerState(OptimizerConfig cfg) : config(cfg) { config.validate(); }
};

/// Applies one SGD or Adam update from the parameters' accumulated gradients.
/// Throws NumericError naming the parameter if any gradient is non-finite; parameters are
/// left untouched in that case.
void optimizer_step(OptimizerState& state, std::span<Parameter> params);

}  // namespace sgmil::diffnet

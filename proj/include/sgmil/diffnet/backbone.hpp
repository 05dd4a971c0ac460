#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sgmil/diffnet/graph.hpp"
#include "sgmil/types.hpp"

namespace sgmil::diffnet {

enum class LayerKind { dense, conv2d, maxpool2d, relu, sigmoid, flatten };

std::string_view to_string(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t units = 0;   // dense: output features; conv2d: output channels
    std::size_t kernel = 0;  // conv2d / maxpool2d window extent
    std::size_t stride = 1;

    static LayerSpec Dense(std::size_t units) { return {LayerKind::dense, units, 0, 1}; }
    static LayerSpec Conv(std::size_t channels, std::size_t kernel, std::size_t stride = 1) {
        return {LayerKind::conv2d, channels, kernel, stride};
    }
    static LayerSpec MaxPool(std::size_t window) { return {LayerKind::maxpool2d, 0, window, window}; }
    static LayerSpec Relu() { return {LayerKind::relu, 0, 0, 1}; }
    static LayerSpec Sigmoid() { return {LayerKind::sigmoid, 0, 0, 1}; }
    static LayerSpec Flatten() { return {LayerKind::flatten, 0, 0, 1}; }
};

struct Parameter {
    std::string name;
    DiffValue value;
};

/// Per-instance classifier built from a layer sequence. The instance shape excludes the
/// batch axis; forward() takes [N, instance_shape...] and returns [N, classes].
class Backbone {
public:
    /// Infers every intermediate shape and initializes weights uniformly in
    /// +-sqrt(6 / fan_in) from `seed`; biases start at zero. Throws ConfigError naming the
    /// offending layer if the sequence does not compose.
    Backbone(std::vector<LayerSpec> layers, Shape instance_shape, std::uint64_t seed);

    DiffValue forward(const DiffValue& batch) const;

    const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
    const Shape& instance_shape() const noexcept { return instance_shape_; }
    std::size_t classes() const noexcept { return classes_; }
    std::vector<Parameter>& parameters() noexcept { return params_; }
    const std::vector<Parameter>& parameters() const noexcept { return params_; }
    std::size_t parameter_count() const;
    void zero_grad();

private:
    struct Slot {
        int weight = -1;
        int bias = -1;
    };
    std::vector<LayerSpec> layers_;
    Shape instance_shape_;
    std::size_t classes_ = 0;
    std::vector<Parameter> params_;
    std::vector<Slot> slots_;
};

/// "lenet5-mil": conv(20,5)/relu/pool2 -> conv(50,5)/relu/pool2 -> flatten -> dense(500)/relu
///               -> dense(C)/sigmoid
/// "mlp":        flatten -> dense(256)/relu -> dense(128)/relu -> dense(C)/sigmoid
std::vector<LayerSpec> backbone_layers(std::string_view id, std::size_t classes);
Backbone make_backbone(std::string_view id, Shape instance_shape, std::size_t classes, std::uint64_t seed);

/// Stacks a bag's instances into one [N, ...] batch.
Tensor stack_instances(const Bag& bag);

/// Runs all instances of a bag as one batch; returns the [N, C] output node.
DiffValue forward_bag(const Backbone& net, const Bag& bag);

/// Instance probabilities for a bag without keeping the graph around.
PredictionSet predict(const Backbone& net, const Bag& bag);

}  // namespace sgmil::diffnet

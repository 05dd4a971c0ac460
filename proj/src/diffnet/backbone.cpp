#include "sgmil/diffnet/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sgmil/diffnet/ops.hpp"
#include "sgmil/errors.hpp"

namespace sgmil::diffnet {

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::maxpool2d: return "maxpool2d";
        case LayerKind::relu: return "relu";
        case LayerKind::sigmoid: return "sigmoid";
        case LayerKind::flatten: return "flatten";
    }
    return "?";
}

namespace {

std::string layer_label(std::size_t index, LayerKind kind) {
    return "layer " + std::to_string(index) + " (" + std::string(to_string(kind)) + ")";
}

Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : t.values()) v = dist(rng);
    return t;
}

}  // namespace

Backbone::Backbone(std::vector<LayerSpec> layers, Shape instance_shape, std::uint64_t seed)
    : layers_(std::move(layers)), instance_shape_(std::move(instance_shape)) {
    if (layers_.empty()) throw ConfigError("backbone has no layers");
    std::mt19937_64 rng(seed);
    Shape cur = instance_shape_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& spec = layers_[i];
        const std::string label = layer_label(i, spec.kind);
        Slot slot;
        switch (spec.kind) {
            case LayerKind::dense: {
                if (cur.size() != 1)
                    throw ConfigError(label + ": expects a flat input, got " + to_string(cur));
                if (spec.units == 0) throw ConfigError(label + ": zero output units");
                slot.weight = static_cast<int>(params_.size());
                params_.push_back({"l" + std::to_string(i) + ".dense.weight",
                                   DiffValue::leaf(he_uniform({spec.units, cur[0]}, cur[0], rng))});
                slot.bias = static_cast<int>(params_.size());
                params_.push_back({"l" + std::to_string(i) + ".dense.bias", DiffValue::leaf(Tensor({spec.units}))});
                cur = {spec.units};
                break;
            }
            case LayerKind::conv2d: {
                if (cur.size() != 3)
                    throw ConfigError(label + ": expects channels x height x width, got " + to_string(cur));
                if (spec.units == 0 || spec.kernel == 0 || spec.stride == 0)
                    throw ConfigError(label + ": zero channels, kernel or stride");
                if (spec.kernel > cur[1] || spec.kernel > cur[2])
                    throw ConfigError(label + ": kernel " + std::to_string(spec.kernel) +
                                      " exceeds input " + to_string(cur));
                const std::size_t fan_in = cur[0] * spec.kernel * spec.kernel;
                slot.weight = static_cast<int>(params_.size());
                params_.push_back({"l" + std::to_string(i) + ".conv2d.weight",
                                   DiffValue::leaf(he_uniform({spec.units, cur[0], spec.kernel, spec.kernel},
                                                              fan_in, rng))});
                slot.bias = static_cast<int>(params_.size());
                params_.push_back({"l" + std::to_string(i) + ".conv2d.bias", DiffValue::leaf(Tensor({spec.units}))});
                cur = {spec.units, (cur[1] - spec.kernel) / spec.stride + 1, (cur[2] - spec.kernel) / spec.stride + 1};
                break;
            }
            case LayerKind::maxpool2d: {
                if (cur.size() != 3)
                    throw ConfigError(label + ": expects channels x height x width, got " + to_string(cur));
                if (spec.kernel == 0 || spec.stride == 0 || spec.kernel > cur[1] || spec.kernel > cur[2])
                    throw ConfigError(label + ": window does not fit input " + to_string(cur));
                cur = {cur[0], (cur[1] - spec.kernel) / spec.stride + 1, (cur[2] - spec.kernel) / spec.stride + 1};
                break;
            }
            case LayerKind::flatten:
                cur = {element_count(cur)};
                break;
            case LayerKind::relu:
            case LayerKind::sigmoid:
                break;
        }
        slots_.push_back(slot);
    }
    if (cur.size() != 1 || cur[0] == 0)
        throw ConfigError("backbone output " + to_string(cur) + " is not one scalar per class");
    classes_ = cur[0];
}

DiffValue Backbone::forward(const DiffValue& batch) const {
    const Shape& in = batch.shape();
    if (in.size() != instance_shape_.size() + 1 || !std::equal(instance_shape_.begin(), instance_shape_.end(), in.begin() + 1))
        throw ConfigError(layer_label(0, layers_.front().kind) + ": input " + to_string(in) +
                          " does not match the configured instance shape " + to_string(instance_shape_));
    DiffValue x = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& spec = layers_[i];
        const Slot& slot = slots_[i];
        switch (spec.kind) {
            case LayerKind::dense: x = dense(x, params_[slot.weight].value, params_[slot.bias].value); break;
            case LayerKind::conv2d:
                x = conv2d(x, params_[slot.weight].value, params_[slot.bias].value, spec.stride);
                break;
            case LayerKind::maxpool2d: x = maxpool2d(x, spec.kernel, spec.stride); break;
            case LayerKind::relu: x = relu(x); break;
            case LayerKind::sigmoid: x = sigmoid(x); break;
            case LayerKind::flatten: x = flatten(x); break;
        }
    }
    return x;
}

std::size_t Backbone::parameter_count() const {
    std::size_t n = 0;
    for (const Parameter& p : params_) n += p.value.value().size();
    return n;
}

void Backbone::zero_grad() {
    for (Parameter& p : params_) p.value.zero_grad();
}

std::vector<LayerSpec> backbone_layers(std::string_view id, std::size_t classes) {
    if (classes == 0) throw ConfigError("backbone needs at least one class");
    if (id == "lenet5-mil")
        return {LayerSpec::Conv(20, 5), LayerSpec::Relu(),  LayerSpec::MaxPool(2),
                LayerSpec::Conv(50, 5), LayerSpec::Relu(),  LayerSpec::MaxPool(2),
                LayerSpec::Flatten(),   LayerSpec::Dense(500), LayerSpec::Relu(),
                LayerSpec::Dense(classes), LayerSpec::Sigmoid()};
    if (id == "mlp")
        return {LayerSpec::Flatten(),      LayerSpec::Dense(256), LayerSpec::Relu(), LayerSpec::Dense(128),
                LayerSpec::Relu(), LayerSpec::Dense(classes), LayerSpec::Sigmoid()};
    throw ConfigError("unknown backbone '" + std::string(id) + "'");
}

Backbone make_backbone(std::string_view id, Shape instance_shape, std::size_t classes, std::uint64_t seed) {
    return Backbone(backbone_layers(id, classes), std::move(instance_shape), seed);
}

Tensor stack_instances(const Bag& bag) {
    if (bag.instances.empty()) throw UsageError("cannot stack an empty bag");
    Shape shape = bag.instances.front().pixels.shape();
    const std::size_t per = element_count(shape);
    shape.insert(shape.begin(), bag.size());
    Tensor batch(std::move(shape));
    for (std::size_t j = 0; j < bag.size(); ++j) {
        const Tensor& px = bag.instances[j].pixels;
        if (px.size() != per) throw ConfigError("instance " + std::to_string(j) + " has a different shape");
        std::copy(px.values().begin(), px.values().end(), batch.data() + j * per);
    }
    return batch;
}

DiffValue forward_bag(const Backbone& net, const Bag& bag) {
    return net.forward(DiffValue::constant(stack_instances(bag), "bag"));
}

PredictionSet predict(const Backbone& net, const Bag& bag) {
    const DiffValue out = forward_bag(net, bag);
    PredictionSet ps(bag.size(), net.classes(),
                     std::vector<double>(out.value().values().begin(), out.value().values().end()));
    ps.grid_h = bag.grid_h;
    ps.grid_w = bag.grid_w;
    return ps;
}

}  // namespace sgmil::diffnet

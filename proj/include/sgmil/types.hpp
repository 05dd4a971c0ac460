#pragma once

// Data types shared by every module: bags of instances and the predictions made on them.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sgmil/diffnet/tensor.hpp"

namespace sgmil {

/// Axis-aligned box with half-open pixel bounds: columns [x0, x1), rows [y0, y1).
struct BoxRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    long long area() const noexcept { return static_cast<long long>(x1 - x0) * (y1 - y0); }
    friend bool operator==(const BoxRect&, const BoxRect&) = default;
};

struct Instance {
    diffnet::Tensor pixels;           // channels x height x width (or a feature vector), in [0, 1]
    int source_class = 0;             // class id in the originating corpus
    std::vector<std::uint8_t> labels; // hidden per-target-class instance labels; evaluation only
};

/// An ordered collection of instances with one binary label per class.
/// Grid bags additionally record the patch-grid layout of their instances (row-major).
struct Bag {
    std::vector<Instance> instances;
    std::vector<std::uint8_t> labels;
    std::uint64_t id = 0;
    std::uint64_t seed = 0;
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;

    std::size_t size() const noexcept { return instances.size(); }
    std::size_t classes() const noexcept { return labels.size(); }
    /// Hidden label of instance j for class c.
    std::uint8_t instance_label(std::size_t j, std::size_t c) const { return instances[j].labels[c]; }
    std::vector<std::uint8_t> instance_labels(std::size_t c) const;

    /// Throws DataError unless y^c == max_j y^c_j for every class and shapes agree.
    void validate() const;
};

/// Per-instance, per-class probabilities for one bag, stored instance-major.
struct PredictionSet {
    std::size_t instances = 0;
    std::size_t classes = 0;
    std::vector<double> p;
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;

    PredictionSet() = default;
    PredictionSet(std::size_t n, std::size_t c, std::vector<double> values = {});

    double& at(std::size_t j, std::size_t c) { return p[j * classes + c]; }
    double at(std::size_t j, std::size_t c) const { return p[j * classes + c]; }
    /// The predictions of class c across instances.
    std::vector<double> column(std::size_t c) const;
    void set_column(std::size_t c, std::span<const double> values);
};

}  // namespace sgmil

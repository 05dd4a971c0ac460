#pragma once

// Classification and localization metrics, and the prediction-map -> bounding-box pipeline.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sgmil/types.hpp"

namespace sgmil::evalkit {

/// Row-major 2-D grid.
template <typename T>
struct Grid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(std::size_t h, std::size_t w, T fill = T{}) : height(h), width(w), data(h * w, fill) {}
    Grid(std::size_t h, std::size_t w, std::vector<T> values) : height(h), width(w), data(std::move(values)) {}

    T& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
    const T& at(std::size_t y, std::size_t x) const { return data[y * width + x]; }
};

using ProbabilityMap = Grid<double>;
using BinaryMask = Grid<std::uint8_t>;

/// Rank-based (Mann-Whitney) ROC AUC; tied scores contribute 1/2.
/// Throws UndefinedMetric unless both classes are present.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// |{p > t_p} & {gt = 1}| / |{p > t_p} | {gt = 1}|; 1 when both sets are empty.
double instance_iou(std::span<const double> preds, std::span<const std::uint8_t> truth, double t_p);

double box_iou(const BoxRect& a, const BoxRect& b);

struct LocalizationConfig {
    double t_p = 0.5;
    double t_iou = 0.1;
    double class_threshold = 0.5;
    std::size_t upsample = 8;
    bool morphology = true;

    void validate() const;
};

ProbabilityMap upsample_nearest(const ProbabilityMap& map, std::size_t factor);
BinaryMask binarize(const ProbabilityMap& map, double threshold);  // strict: p > threshold
/// Binary opening with a 3x3 cross; pixels outside the image do not erode the border.
BinaryMask open_cross(const BinaryMask& mask);

struct Components {
    Grid<int> labels;  // 0 = background, components numbered from 1 in row-major first-touch order
    int count = 0;
};

/// 8-connected component labeling.
Components connected_components(const BinaryMask& mask);

/// Tight bounding box of the component with label `id`.
BoxRect component_box(const Components& comps, int id);

/// Upsample -> threshold -> optional opening -> components -> box of the component holding the
/// (first) argmax. If the opening removed the argmax pixel, the unopened mask is used instead.
/// Returns nullopt when no pixel exceeds t_p.
std::optional<BoxRect> extract_box(const ProbabilityMap& map, const LocalizationConfig& cfg);

struct LocalizationCase {
    double class_score = 0.0;
    std::optional<BoxRect> predicted;
    BoxRect truth;
};

bool is_hit(const LocalizationCase& c, const LocalizationConfig& cfg);

/// #hit / (#hit + #miss). Throws UndefinedMetric on an empty list.
double localization_accuracy(std::span<const LocalizationCase> cases, const LocalizationConfig& cfg);

}  // namespace sgmil::evalkit

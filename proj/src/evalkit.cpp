#include "sgmil/evalkit.hpp"

#include <algorithm>
#include <numeric>

#include "sgmil/errors.hpp"

namespace sgmil::evalkit {

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw UsageError("auc: scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double positive_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) {
                positive_rank_sum += avg_rank;
                ++n_pos;
            }
        i = j;
    }
    const std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw UndefinedMetric("AUC needs at least one positive and one negative label");
    const double np = static_cast<double>(n_pos);
    return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double instance_iou(std::span<const double> preds, std::span<const std::uint8_t> truth, double t_p) {
    if (preds.size() != truth.size()) throw UsageError("instance_iou: length mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t j = 0; j < preds.size(); ++j) {
        const bool p = preds[j] > t_p;
        const bool g = truth[j] != 0;
        inter += p && g;
        uni += p || g;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double box_iou(const BoxRect& a, const BoxRect& b) {
    const int ix = std::max(0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
    const int iy = std::max(0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
    const double inter = static_cast<double>(ix) * iy;
    const double uni = static_cast<double>(a.area() + b.area()) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

void LocalizationConfig::validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(t_p) || !unit(t_iou) || !unit(class_threshold)) throw ConfigError("localization thresholds must lie in [0, 1]");
    if (upsample < 1) throw ConfigError("upsample factor must be >= 1");
}

ProbabilityMap upsample_nearest(const ProbabilityMap& map, std::size_t factor) {
    ProbabilityMap out(map.height * factor, map.width * factor);
    for (std::size_t y = 0; y < out.height; ++y)
        for (std::size_t x = 0; x < out.width; ++x) out.at(y, x) = map.at(y / factor, x / factor);
    return out;
}

BinaryMask binarize(const ProbabilityMap& map, double threshold) {
    BinaryMask out(map.height, map.width);
    for (std::size_t i = 0; i < map.data.size(); ++i) out.data[i] = map.data[i] > threshold;
    return out;
}

BinaryMask open_cross(const BinaryMask& mask) {
    const std::size_t h = mask.height, w = mask.width;
    auto get = [&](const BinaryMask& m, std::ptrdiff_t y, std::ptrdiff_t x, std::uint8_t outside) -> std::uint8_t {
        if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(h) || x >= static_cast<std::ptrdiff_t>(w)) return outside;
        return m.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
    };
    constexpr std::ptrdiff_t dy[5] = {0, -1, 1, 0, 0};
    constexpr std::ptrdiff_t dx[5] = {0, 0, 0, -1, 1};
    BinaryMask eroded(h, w), opened(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            std::uint8_t v = 1;
            for (int k = 0; k < 5; ++k) v &= get(mask, static_cast<std::ptrdiff_t>(y) + dy[k], static_cast<std::ptrdiff_t>(x) + dx[k], 1);
            eroded.at(y, x) = v;
        }
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            std::uint8_t v = 0;
            for (int k = 0; k < 5; ++k) v |= get(eroded, static_cast<std::ptrdiff_t>(y) + dy[k], static_cast<std::ptrdiff_t>(x) + dx[k], 0);
            opened.at(y, x) = v;
        }
    return opened;
}

Components connected_components(const BinaryMask& mask) {
    // Two-pass labeling with union-find; final labels renumbered in row-major first-touch order.
    const std::size_t h = mask.height, w = mask.width;
    Grid<int> provisional(h, w, 0);
    std::vector<int> parent{0};
    auto find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    auto unite = [&](int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    };
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            if (!mask.at(y, x)) continue;
            int label = 0;
            const std::ptrdiff_t ny[4] = {0, -1, -1, -1};
            const std::ptrdiff_t nx[4] = {-1, -1, 0, 1};
            for (int k = 0; k < 4; ++k) {
                const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + ny[k];
                const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + nx[k];
                if (yy < 0 || xx < 0 || xx >= static_cast<std::ptrdiff_t>(w)) continue;
                const int other = provisional.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
                if (other == 0) continue;
                if (label == 0) label = other;
                else unite(label, other);
            }
            if (label == 0) {
                label = static_cast<int>(parent.size());
                parent.push_back(label);
            }
            provisional.at(y, x) = label;
        }

    Components out{Grid<int>(h, w, 0), 0};
    std::vector<int> final_id(parent.size(), 0);
    for (std::size_t i = 0; i < provisional.data.size(); ++i) {
        const int p = provisional.data[i];
        if (p == 0) continue;
        const int root = find(p);
        if (final_id[root] == 0) final_id[root] = ++out.count;
        out.labels.data[i] = final_id[root];
    }
    return out;
}

BoxRect component_box(const Components& comps, int id) {
    BoxRect box{static_cast<int>(comps.labels.width), static_cast<int>(comps.labels.height), 0, 0};
    bool found = false;
    for (std::size_t y = 0; y < comps.labels.height; ++y)
        for (std::size_t x = 0; x < comps.labels.width; ++x) {
            if (comps.labels.at(y, x) != id) continue;
            found = true;
            box.x0 = std::min(box.x0, static_cast<int>(x));
            box.y0 = std::min(box.y0, static_cast<int>(y));
            box.x1 = std::max(box.x1, static_cast<int>(x) + 1);
            box.y1 = std::max(box.y1, static_cast<int>(y) + 1);
        }
    if (!found) throw UsageError("component " + std::to_string(id) + " does not exist");
    return box;
}

std::optional<BoxRect> extract_box(const ProbabilityMap& map, const LocalizationConfig& cfg) {
    cfg.validate();
    if (map.data.empty()) throw UsageError("extract_box on an empty map");
    const ProbabilityMap up = upsample_nearest(map, cfg.upsample);
    const std::size_t peak = static_cast<std::size_t>(std::max_element(up.data.begin(), up.data.end()) - up.data.begin());
    if (!(up.data[peak] > cfg.t_p)) return std::nullopt;

    const BinaryMask raw = binarize(up, cfg.t_p);
    if (cfg.morphology) {
        const BinaryMask opened = open_cross(raw);
        if (opened.data[peak]) {
            const Components comps = connected_components(opened);
            return component_box(comps, comps.labels.data[peak]);
        }
    }
    const Components comps = connected_components(raw);
    return component_box(comps, comps.labels.data[peak]);
}

bool is_hit(const LocalizationCase& c, const LocalizationConfig& cfg) {
    return c.class_score >= cfg.class_threshold && c.predicted.has_value() && box_iou(*c.predicted, c.truth) > cfg.t_iou;
}

double localization_accuracy(std::span<const LocalizationCase> cases, const LocalizationConfig& cfg) {
    cfg.validate();
    if (cases.empty()) throw UndefinedMetric("localization accuracy over zero cases");
    std::size_t hits = 0;
    for (const auto& c : cases) hits += is_hit(c, cfg);
    return static_cast<double>(hits) / static_cast<double>(cases.size());
}

}  // namespace sgmil::evalkit

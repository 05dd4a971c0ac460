#include "sgmil/sgloss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sgmil/errors.hpp"

namespace sgmil::sgloss {

void SGLConfig::validate() const {
    if (!(delta_l >= 0.0 && delta_l <= 0.5)) throw ConfigError("delta_l must lie in [0, 0.5]");
    if (!(lambda >= 0.0) || !(mu >= 0.0)) throw ConfigError("lambda and mu must be non-negative");
    if (!(eps_clamp > 0.0 && eps_clamp < 0.5)) throw ConfigError("eps_clamp must lie in (0, 0.5)");
}

double ClassMask::weight() const { return std::exp2(alpha - 1.0); }

double bce(double p, double t, double eps_clamp) {
    const double q = std::clamp(p, eps_clamp, 1.0 - eps_clamp);
    return -(t * std::log(q) + (1.0 - t) * std::log1p(-q));
}

double bce_grad(double p, double t, double eps_clamp) {
    if (p < eps_clamp || p > 1.0 - eps_clamp) return 0.0;
    return (p - t) / (p * (1.0 - p));
}

namespace {

void check_label(std::uint8_t y) {
    if (y > 1) throw DataError("bag label " + std::to_string(y) + " is not in {0, 1}");
}

void check_batch(std::span<const PredictionSet> preds, std::span<const Labels> labels) {
    if (preds.empty()) throw UsageError("loss over an empty batch");
    if (preds.size() != labels.size()) throw UsageError("prediction and label batch sizes differ");
    const std::size_t classes = preds.front().classes;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].instances == 0) throw UsageError("bag " + std::to_string(i) + " is empty");
        if (preds[i].classes != classes || labels[i].size() != classes)
            throw UsageError("inconsistent class count in bag " + std::to_string(i));
        for (std::uint8_t y : labels[i]) check_label(y);
    }
}

std::vector<std::vector<double>> zero_grads(std::span<const PredictionSet> preds) {
    std::vector<std::vector<double>> g;
    g.reserve(preds.size());
    for (const auto& p : preds) g.emplace_back(p.p.size(), 0.0);
    return g;
}

void accumulate(LossResult& into, const LossResult& from, double factor) {
    into.value += factor * from.value;
    for (std::size_t i = 0; i < into.grad.size(); ++i)
        for (std::size_t k = 0; k < into.grad[i].size(); ++k) into.grad[i][k] += factor * from.grad[i][k];
}

}  // namespace

LossResult bag_loss(std::span<const double> pooled, std::span<const std::uint8_t> labels, std::size_t classes,
                    double eps_clamp) {
    if (pooled.empty() || classes == 0 || pooled.size() % classes != 0)
        throw UsageError("bag_loss: pooled predictions do not tile the class count");
    if (pooled.size() != labels.size()) throw UsageError("bag_loss: label count mismatch");
    const double norm = static_cast<double>(pooled.size());
    LossResult r;
    r.grad.emplace_back(pooled.size());
    for (std::size_t k = 0; k < pooled.size(); ++k) {
        check_label(labels[k]);
        r.value += bce(pooled[k], labels[k], eps_clamp);
        r.grad[0][k] = bce_grad(pooled[k], labels[k], eps_clamp) / norm;
    }
    r.value /= norm;
    return r;
}

std::vector<double> rescale(std::span<const double> preds) {
    if (preds.empty()) throw UsageError("rescale of an empty prediction list");
    const auto [lo, hi] = std::minmax_element(preds.begin(), preds.end());
    const double min = *lo, range = *hi - *lo;
    std::vector<double> theta(preds.size());
    for (std::size_t j = 0; j < preds.size(); ++j) theta[j] = range > 0.0 ? (preds[j] - min) / range : 0.5;
    return theta;
}

double median(std::span<const double> values) {
    if (values.empty()) throw UsageError("median of an empty list");
    std::vector<double> v(values.begin(), values.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    if (v.size() % 2 == 1) return v[mid];
    const double upper = v[mid];
    const double lower = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lower + upper);
}

double certainty_weight(std::span<const double> preds, std::uint8_t y) {
    check_label(y);
    const double top = *std::max_element(preds.begin(), preds.end());
    return std::max(top - median(preds), 1.0 - static_cast<double>(y));
}

ClassMask build_mask(std::span<const double> preds, std::span<const double> theta, std::uint8_t y,
                     const SGLConfig& cfg) {
    if (preds.empty() || preds.size() != theta.size()) throw UsageError("build_mask: length mismatch");
    check_label(y);
    ClassMask m;
    m.target.resize(preds.size());
    m.region.resize(preds.size());
    for (std::size_t j = 0; j < preds.size(); ++j) {
        Region r;
        double t;
        if (y == 0 || theta[j] < cfg.delta_l) {
            r = Region::neg;
            t = 0.0;
        } else if (theta[j] <= cfg.delta_h()) {
            r = Region::amb;
            t = theta[j];
        } else {
            r = Region::pos;
            t = 1.0;
        }
        m.region[j] = r;
        m.target[j] = t;
        ++m.counts[static_cast<std::size_t>(r)];
    }
    m.alpha = certainty_weight(preds, y);
    return m;
}

TargetMask build_masks(const PredictionSet& preds, std::span<const std::uint8_t> labels, const SGLConfig& cfg) {
    if (labels.size() != preds.classes) throw UsageError("build_masks: label count mismatch");
    TargetMask mask;
    for (std::size_t c = 0; c < preds.classes; ++c) {
        const std::vector<double> col = preds.column(c);
        mask.classes.push_back(build_mask(col, rescale(col), labels[c], cfg));
    }
    return mask;
}

LossResult pooled_bag_loss(std::span<const PredictionSet> preds, std::span<const Labels> labels,
                           const pooling::PoolingSpec& pool, double eps_clamp) {
    check_batch(preds, labels);
    const std::size_t classes = preds.front().classes;
    std::vector<double> pooled;
    std::vector<std::uint8_t> flat_labels;
    for (std::size_t i = 0; i < preds.size(); ++i)
        for (std::size_t c = 0; c < classes; ++c) {
            pooled.push_back(pooling::pool(pool, preds[i].column(c)));
            flat_labels.push_back(labels[i][c]);
        }
    const LossResult outer = bag_loss(pooled, flat_labels, classes, eps_clamp);

    LossResult r;
    r.value = outer.value;
    r.grad = zero_grads(preds);
    std::vector<double> local;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        local.resize(preds[i].instances);
        for (std::size_t c = 0; c < classes; ++c) {
            pooling::pool_backward(pool, preds[i].column(c), outer.grad[0][i * classes + c], local);
            for (std::size_t j = 0; j < local.size(); ++j) r.grad[i][j * classes + c] = local[j];
        }
    }
    return r;
}

LossResult instance_loss(std::span<const PredictionSet> preds, std::span<const TargetMask> masks, double eps_clamp) {
    if (preds.empty() || preds.size() != masks.size()) throw UsageError("instance_loss: batch size mismatch");
    const std::size_t classes = preds.front().classes;
    const double norm = static_cast<double>(preds.size() * classes);
    LossResult r;
    r.grad = zero_grads(preds);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (masks[i].classes.size() != classes || preds[i].classes != classes)
            throw UsageError("instance_loss: mask/prediction class mismatch");
        for (std::size_t c = 0; c < classes; ++c) {
            const ClassMask& m = masks[i].classes[c];
            if (m.target.size() != preds[i].instances) throw UsageError("instance_loss: mask/prediction length mismatch");
            const double w = m.weight();
            double term = 0.0;
            for (std::size_t j = 0; j < m.target.size(); ++j) {
                const double region_norm = static_cast<double>(m.counts[static_cast<std::size_t>(m.region[j])]);
                const double p = preds[i].at(j, c);
                term += bce(p, m.target[j], eps_clamp) / region_norm;
                r.grad[i][j * classes + c] = w * bce_grad(p, m.target[j], eps_clamp) / region_norm / norm;
            }
            r.value += w * term;
        }
    }
    r.value /= norm;
    return r;
}

LossResult mask_penalty(std::span<const PredictionSet> preds, std::span<const TargetMask> masks, double mu) {
    if (preds.empty() || preds.size() != masks.size()) throw UsageError("mask_penalty: batch size mismatch");
    const std::size_t classes = preds.front().classes;
    const double norm = static_cast<double>(preds.size() * classes);
    LossResult r;
    r.grad = zero_grads(preds);
    for (std::size_t i = 0; i < preds.size(); ++i)
        for (std::size_t c = 0; c < classes; ++c) {
            const ClassMask& m = masks[i].classes.at(c);
            if (m.target.size() != preds[i].instances) throw UsageError("mask_penalty: mask/prediction length mismatch");
            double sq = 0.0;
            for (std::size_t j = 0; j < m.target.size(); ++j)
                if (m.target[j] > 0.0) sq += preds[i].at(j, c) * preds[i].at(j, c);
            const double l2 = std::sqrt(sq);
            r.value += mu * l2;
            if (l2 > 0.0)
                for (std::size_t j = 0; j < m.target.size(); ++j)
                    if (m.target[j] > 0.0) r.grad[i][j * classes + c] = mu * preds[i].at(j, c) / l2 / norm;
        }
    r.value /= norm;
    return r;
}

LossResult sgl_total_with_masks(std::span<const PredictionSet> preds, std::span<const Labels> labels,
                                const pooling::PoolingSpec& pool, const SGLConfig& cfg,
                                std::span<const TargetMask> masks) {
    cfg.validate();
    LossResult total = pooled_bag_loss(preds, labels, pool, cfg.eps_clamp);
    accumulate(total, instance_loss(preds, masks, cfg.eps_clamp), cfg.lambda);
    const LossResult pen = mask_penalty(preds, masks, cfg.mu);
    accumulate(total, pen, 1.0);
    if (!std::isfinite(total.value)) throw NumericError("self-guiding loss is not finite");
    return total;
}

LossResult sgl_total(std::span<const PredictionSet> preds, std::span<const Labels> labels,
                     const pooling::PoolingSpec& pool, const SGLConfig& cfg) {
    check_batch(preds, labels);
    std::vector<TargetMask> masks;
    masks.reserve(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) masks.push_back(build_masks(preds[i], labels[i], cfg));
    return sgl_total_with_masks(preds, labels, pool, cfg, masks);
}

std::vector<double> bil_targets(std::span<const double> preds, std::uint8_t y) {
    check_label(y);
    std::vector<double> t(preds.size(), 0.0);
    if (y == 1)
        for (std::size_t j = 0; j < preds.size(); ++j) t[j] = preds[j] > 0.5 ? 1.0 : 0.0;
    return t;
}

LossResult bil_loss(std::span<const PredictionSet> preds, std::span<const Labels> labels,
                    const pooling::PoolingSpec& pool, double eps_clamp) {
    LossResult total = pooled_bag_loss(preds, labels, pool, eps_clamp);
    const std::size_t classes = preds.front().classes;
    const double norm = static_cast<double>(preds.size() * classes);
    double inst = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        for (std::size_t c = 0; c < classes; ++c) {
            const std::vector<double> col = preds[i].column(c);
            const std::vector<double> t = bil_targets(col, labels[i][c]);
            const double n = static_cast<double>(col.size());
            double term = 0.0;
            for (std::size_t j = 0; j < col.size(); ++j) {
                term += bce(col[j], t[j], eps_clamp);
                total.grad[i][j * classes + c] += bce_grad(col[j], t[j], eps_clamp) / n / norm;
            }
            inst += term / n;
        }
    total.value += inst / norm;
    return total;
}

LossResult mmm_loss(std::span<const PredictionSet> preds, std::span<const Labels> labels, double eps_clamp) {
    check_batch(preds, labels);
    const std::size_t classes = preds.front().classes;
    const double norm = static_cast<double>(preds.size() * classes);
    LossResult r;
    r.grad = zero_grads(preds);
    for (std::size_t i = 0; i < preds.size(); ++i)
        for (std::size_t c = 0; c < classes; ++c) {
            const std::vector<double> col = preds[i].column(c);
            const double y = labels[i][c];
            const auto hi = static_cast<std::size_t>(std::max_element(col.begin(), col.end()) - col.begin());
            const auto lo = static_cast<std::size_t>(std::min_element(col.begin(), col.end()) - col.begin());
            double mean = 0.0;
            for (double p : col) mean += p;
            const double n = static_cast<double>(col.size());
            mean /= n;
            r.value += bce(col[hi], y, eps_clamp) + bce(col[lo], 0.0, eps_clamp) + bce(mean, 0.5 * y, eps_clamp);
            const double g_mean = bce_grad(mean, 0.5 * y, eps_clamp) / n;
            for (std::size_t j = 0; j < col.size(); ++j) r.grad[i][j * classes + c] += g_mean / norm;
            r.grad[i][hi * classes + c] += bce_grad(col[hi], y, eps_clamp) / norm;
            r.grad[i][lo * classes + c] += bce_grad(col[lo], 0.0, eps_clamp) / norm;
        }
    r.value /= norm;
    return r;
}

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::sgl: return "sgl";
        case LossKind::bag_only: return "bag_only";
        case LossKind::bil: return "bil";
        case LossKind::mmm: return "mmm";
    }
    return "?";
}

LossKind parse_loss_kind(std::string_view name) {
    for (LossKind k : {LossKind::sgl, LossKind::bag_only, LossKind::bil, LossKind::mmm})
        if (to_string(k) == name) return k;
    throw ConfigError("unknown loss '" + std::string(name) + "'");
}

LossResult evaluate(LossKind kind, std::span<const PredictionSet> preds, std::span<const Labels> labels,
                    const pooling::PoolingSpec& pool, const SGLConfig& cfg) {
    switch (kind) {
        case LossKind::sgl: return sgl_total(preds, labels, pool, cfg);
        case LossKind::bag_only: return pooled_bag_loss(preds, labels, pool, cfg.eps_clamp);
        case LossKind::bil: return bil_loss(preds, labels, pool, cfg.eps_clamp);
        case LossKind::mmm: return mmm_loss(preds, labels, cfg.eps_clamp);
    }
    throw ConfigError("unknown loss kind");
}

}  // namespace sgmil::sgloss

#include "sgmil/pooling.hpp"

#include <algorithm>
#include <cmath>

#include "sgmil/errors.hpp"

namespace sgmil::pooling {

std::string_view to_string(PoolKind kind) {
    switch (kind) {
        case PoolKind::max: return "max";
        case PoolKind::mean: return "mean";
        case PoolKind::lse: return "lse";
        case PoolKind::noisy_or: return "noisy_or";
        case PoolKind::softmax: return "softmax";
    }
    return "?";
}

PoolKind parse_pool_kind(std::string_view name) {
    for (PoolKind k : {PoolKind::max, PoolKind::mean, PoolKind::lse, PoolKind::noisy_or, PoolKind::softmax})
        if (to_string(k) == name) return k;
    throw ConfigError("unknown pooling kind '" + std::string(name) + "'");
}

void PoolingSpec::validate() const {
    if (kind == PoolKind::lse && !(r > 0.0 && std::isfinite(r)))
        throw ConfigError("LSE pooling needs a positive finite sharpness r");
}

namespace {

void check_input(std::span<const double> preds) {
    if (preds.empty()) throw UsageError("pooling over an empty bag");
    for (double p : preds) {
        if (!std::isfinite(p)) throw DataError("pooling input is not finite");
        if (p < 0.0 || p > 1.0) throw DataError("pooling input outside [0, 1]");
    }
}

std::size_t first_argmax(std::span<const double> p) {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace

double pool(const PoolingSpec& spec, std::span<const double> preds) {
    spec.validate();
    check_input(preds);
    const double n = static_cast<double>(preds.size());
    switch (spec.kind) {
        case PoolKind::max: return preds[first_argmax(preds)];
        case PoolKind::mean: {
            double s = 0.0;
            for (double p : preds) s += p;
            return s / n;
        }
        case PoolKind::lse: {
            const double top = preds[first_argmax(preds)];
            double s = 0.0;
            for (double p : preds) s += std::exp(spec.r * (p - top));
            return std::clamp(top + std::log(s / n) / spec.r, 0.0, 1.0);
        }
        case PoolKind::noisy_or: {
            double log_keep = 0.0;
            bool saturated = false;
            for (double p : preds) {
                const double keep = 1.0 - p;
                saturated = saturated || keep <= kNoisyOrFloor;
                log_keep += std::log(std::max(keep, kNoisyOrFloor));
            }
            return saturated ? 1.0 : 1.0 - std::exp(log_keep);
        }
        case PoolKind::softmax: {
            // exp(p) with p in [0, 1] cannot overflow; no shift needed.
            double num = 0.0, den = 0.0;
            for (double p : preds) {
                const double w = std::exp(p);
                num += p * w;
                den += w;
            }
            return num / den;
        }
    }
    return 0.0;
}

void pool_backward(const PoolingSpec& spec, std::span<const double> preds, double upstream,
                   std::span<double> out) {
    spec.validate();
    check_input(preds);
    if (out.size() != preds.size()) throw UsageError("pool_backward: output length mismatch");
    const double n = static_cast<double>(preds.size());
    switch (spec.kind) {
        case PoolKind::max:
            std::fill(out.begin(), out.end(), 0.0);
            out[first_argmax(preds)] = upstream;
            return;
        case PoolKind::mean:
            std::fill(out.begin(), out.end(), upstream / n);
            return;
        case PoolKind::lse: {
            const double top = preds[first_argmax(preds)];
            double s = 0.0;
            for (std::size_t j = 0; j < preds.size(); ++j) s += (out[j] = std::exp(spec.r * (preds[j] - top)));
            for (double& g : out) g = upstream * g / s;
            return;
        }
        case PoolKind::noisy_or: {
            double log_keep = 0.0;
            for (double p : preds) log_keep += std::log(std::max(1.0 - p, kNoisyOrFloor));
            // d/dp_j [1 - prod_k (1 - p_k)] = prod_{k != j} (1 - p_k)
            for (std::size_t j = 0; j < preds.size(); ++j)
                out[j] = upstream * std::exp(log_keep - std::log(std::max(1.0 - preds[j], kNoisyOrFloor)));
            return;
        }
        case PoolKind::softmax: {
            double num = 0.0, den = 0.0;
            for (double p : preds) {
                const double w = std::exp(p);
                num += p * w;
                den += w;
            }
            const double pooled = num / den;
            for (std::size_t j = 0; j < preds.size(); ++j)
                out[j] = upstream * std::exp(preds[j]) * (1.0 + preds[j] - pooled) / den;
            return;
        }
    }
}

}  // namespace sgmil::pooling

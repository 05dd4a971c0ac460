#pragma once

// Self-guiding MIL loss and the BIL / MMM baselines.
//
// Every loss returns its value together with the gradient with respect to the instance
// probabilities of each bag (same instance-major layout as PredictionSet::p). Generated
// supervision (rescaled targets, ternary mask, certainty weight, thresholded pseudo-labels)
// is recomputed per evaluation and treated as a constant: no gradient flows through it.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "sgmil/pooling.hpp"
#include "sgmil/types.hpp"

namespace sgmil::sgloss {

inline constexpr double kDefaultClamp = 1e-7;

struct SGLConfig {
    double delta_l = 0.3;
    double lambda = 1.0;
    double mu = 1e-3;
    double eps_clamp = kDefaultClamp;

    double delta_h() const noexcept { return 1.0 - delta_l; }
    void validate() const;
};

enum class Region : std::uint8_t { neg = 0, amb = 1, pos = 2 };

/// Generated supervision for one (bag, class).
struct ClassMask {
    std::vector<double> target;  // M_j: 0, theta_j or 1
    std::vector<Region> region;
    double alpha = 1.0;
    std::array<std::size_t, 3> counts{};  // indexed by Region

    double weight() const;  // 2^(alpha - 1)
};

/// Masks for every class of one bag.
struct TargetMask {
    std::vector<ClassMask> classes;
};

using Labels = std::vector<std::uint8_t>;

struct LossResult {
    double value = 0.0;
    std::vector<std::vector<double>> grad;  // one entry per bag, instance-major
};

double bce(double p, double t, double eps_clamp = kDefaultClamp);
/// d bce / d p; zero where the clamp is active.
double bce_grad(double p, double t, double eps_clamp = kDefaultClamp);

/// Mean BCE over all (bag, class) pairs of pooled predictions laid out bag-major
/// (pooled[i * classes + c]). grad[0] holds d loss / d pooled.
LossResult bag_loss(std::span<const double> pooled, std::span<const std::uint8_t> labels,
                    std::size_t classes, double eps_clamp = kDefaultClamp);

/// Min-max scaling to [0, 1]; a constant list maps to 0.5 everywhere.
std::vector<double> rescale(std::span<const double> preds);

/// Median; for an even count the mean of the two central order statistics.
double median(std::span<const double> values);

/// alpha = max(max(p) - median(p), 1 - y) on raw predictions.
double certainty_weight(std::span<const double> preds, std::uint8_t y);

ClassMask build_mask(std::span<const double> preds, std::span<const double> theta, std::uint8_t y,
                     const SGLConfig& cfg);
TargetMask build_masks(const PredictionSet& preds, std::span<const std::uint8_t> labels, const SGLConfig& cfg);

/// Pooled-bag BCE term, differentiated through the pooling function to the instances.
LossResult pooled_bag_loss(std::span<const PredictionSet> preds, std::span<const Labels> labels,
                           const pooling::PoolingSpec& pool, double eps_clamp = kDefaultClamp);

/// Region-normalized, alpha-weighted instance BCE against the mask targets, divided by N*C.
LossResult instance_loss(std::span<const PredictionSet> preds, std::span<const TargetMask> masks,
                         double eps_clamp = kDefaultClamp);

/// mu * || p restricted to M > 0 ||_2 per (bag, class), averaged over bags and classes.
LossResult mask_penalty(std::span<const PredictionSet> preds, std::span<const TargetMask> masks, double mu);

/// Bag term + lambda * instance term + mask penalty, with masks supplied by the caller.
LossResult sgl_total_with_masks(std::span<const PredictionSet> preds, std::span<const Labels> labels,
                                const pooling::PoolingSpec& pool, const SGLConfig& cfg,
                                std::span<const TargetMask> masks);

/// Full self-guiding loss: builds the masks from `preds`, then sgl_total_with_masks.
LossResult sgl_total(std::span<const PredictionSet> preds, std::span<const Labels> labels,
                     const pooling::PoolingSpec& pool, const SGLConfig& cfg);

/// Pseudo-labels 1[p > 0.5] for positive bags, all zero for negative bags.
std::vector<double> bil_targets(std::span<const double> preds, std::uint8_t y);

/// Pooled bag BCE + mean instance BCE against BIL pseudo-labels.
LossResult bil_loss(std::span<const PredictionSet> preds, std::span<const Labels> labels,
                    const pooling::PoolingSpec& pool, double eps_clamp = kDefaultClamp);

/// Extreme-value supervision: bce(max, y) + bce(min, 0) + bce(mean, y / 2) per (bag, class).
LossResult mmm_loss(std::span<const PredictionSet> preds, std::span<const Labels> labels,
                    double eps_clamp = kDefaultClamp);

enum class LossKind { sgl, bag_only, bil, mmm };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

/// Dispatches on the configured loss.
LossResult evaluate(LossKind kind, std::span<const PredictionSet> preds, std::span<const Labels> labels,
                    const pooling::PoolingSpec& pool, const SGLConfig& cfg);

}  // namespace sgmil::sgloss

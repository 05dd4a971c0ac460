#pragma once

// Bag-level aggregation of instance probabilities, with closed-form gradients.
//
//   max       max_j p_j
//   mean      (1/N) sum_j p_j
//   lse       (1/r) ln((1/N) sum_j exp(r p_j))
//   noisy_or  1 - prod_j (1 - p_j), evaluated as 1 - exp(sum_j ln max(1 - p_j, 1e-12))
//   softmax   sum_j p_j exp(p_j) / sum_k exp(p_k)

#include <span>
#include <string>
#include <string_view>

namespace sgmil::pooling {

enum class PoolKind { max, mean, lse, noisy_or, softmax };

std::string_view to_string(PoolKind kind);
PoolKind parse_pool_kind(std::string_view name);

struct PoolingSpec {
    PoolKind kind = PoolKind::max;
    double r = 10.0;  // LSE sharpness

    void validate() const;
};

/// Floor applied to (1 - p) inside the noisy-OR log.
inline constexpr double kNoisyOrFloor = 1e-12;

/// Throws UsageError on an empty list and DataError on non-finite or out-of-range input.
double pool(const PoolingSpec& spec, std::span<const double> preds);

/// Writes upstream * d pool / d p_j into `out` (overwritten). Max routes the whole
/// subgradient to the first maximal index.
void pool_backward(const PoolingSpec& spec, std::span<const double> preds, double upstream,
                   std::span<double> out);

}  // namespace sgmil::pooling

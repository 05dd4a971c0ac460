#pragma once

// Differentiable ops over DiffValue. Batched ops treat axis 0 as the instance axis and
// never mix data across it.

#include <cstddef>

#include "sgmil/diffnet/graph.hpp"

namespace sgmil::diffnet {

DiffValue add(const DiffValue& a, const DiffValue& b);
DiffValue mul(const DiffValue& a, const DiffValue& b);
DiffValue scale(const DiffValue& a, double factor);
DiffValue sum(const DiffValue& a);

/// x: [N, in], weight: [out, in], bias: [out] -> [N, out]
DiffValue dense(const DiffValue& x, const DiffValue& weight, const DiffValue& bias);

/// Valid (unpadded) convolution. x: [N, C, H, W], weight: [O, C, K, K], bias: [O]
/// -> [N, O, (H - K) / stride + 1, (W - K) / stride + 1]
DiffValue conv2d(const DiffValue& x, const DiffValue& weight, const DiffValue& bias,
                 std::size_t stride = 1);

/// Non-overlapping-or-strided max pooling over [N, C, H, W]; ties route to the first maximum.
DiffValue maxpool2d(const DiffValue& x, std::size_t window, std::size_t stride);

DiffValue relu(const DiffValue& x);
DiffValue sigmoid(const DiffValue& x);

/// [N, ...] -> [N, prod(...)]
DiffValue flatten(const DiffValue& x);

/// Scalar node whose value is `value` and whose gradient w.r.t. `input` is `grad_wrt_input`.
/// Used to splice losses with closed-form gradients into the graph.
DiffValue attach_loss(const DiffValue& input, double value, Tensor grad_wrt_input);

}  // namespace sgmil::diffnet

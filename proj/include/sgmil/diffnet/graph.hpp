#pragma once

// Reverse-mode differentiation over a dynamically recorded graph.
//
// A DiffValue is a handle to a graph node holding a tensor and its gradient accumulator.
// Leaves (parameters, inputs) are created with DiffValue::leaf; every op records a node
// with a backward closure. backward(loss) replays the graph in reverse topological order.
// Leaf gradients accumulate across calls until zero_grad(); interior gradients are reset
// on every call.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sgmil/diffnet/tensor.hpp"

namespace sgmil::diffnet {

class DiffValue {
public:
    struct Node;
    using BackwardFn = std::function<void(Node& self)>;

    struct Node {
        Tensor value;
        Tensor grad;  // allocated lazily for interior nodes
        std::vector<std::shared_ptr<Node>> parents;
        BackwardFn backward;
        std::string name;
        bool requires_grad = true;  // false for constant inputs; ops may skip their gradient

        Tensor& ensure_grad();
    };

    DiffValue() = default;

    static DiffValue leaf(Tensor value, std::string name = {});
    /// Leaf whose gradient is never needed (data fed into the network).
    static DiffValue constant(Tensor value, std::string name = {});
    static DiffValue from_op(Tensor value, std::vector<DiffValue> parents, BackwardFn backward,
                             std::string name = {});

    bool defined() const noexcept { return node_ != nullptr; }
    bool is_leaf() const;

    const Tensor& value() const;
    Tensor& value();
    /// Gradient accumulator; zero-filled if nothing has been accumulated yet.
    const Tensor& grad() const;
    Tensor& grad();
    const Shape& shape() const { return value().shape(); }
    const std::string& name() const;

    /// Value of a single-element tensor.
    double item() const;
    void zero_grad();

    Node& node() const;

private:
    explicit DiffValue(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;
};

/// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
/// Throws UsageError when `loss` is undefined, not a scalar, or not produced by an op.
void backward(const DiffValue& loss);

}  // namespace sgmil::diffnet

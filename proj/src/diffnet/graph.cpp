#include "sgmil/diffnet/graph.hpp"

#include <unordered_set>

#include "sgmil/errors.hpp"

namespace sgmil::diffnet {

Tensor& DiffValue::Node::ensure_grad() {
    if (grad.shape() != value.shape()) grad = Tensor(value.shape());
    return grad;
}

DiffValue DiffValue::constant(Tensor value, std::string name) {
    DiffValue v = leaf(std::move(value), std::move(name));
    v.node_->requires_grad = false;
    return v;
}

DiffValue DiffValue::leaf(Tensor value, std::string name) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->grad = Tensor(node->value.shape());
    node->name = std::move(name);
    return DiffValue(std::move(node));
}

DiffValue DiffValue::from_op(Tensor value, std::vector<DiffValue> parents, BackwardFn backward,
                             std::string name) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->parents.reserve(parents.size());
    for (auto& p : parents) {
        if (!p.defined()) throw UsageError("op '" + name + "' received an undefined operand");
        node->parents.push_back(p.node_);
    }
    node->backward = std::move(backward);
    node->name = std::move(name);
    return DiffValue(std::move(node));
}

DiffValue::Node& DiffValue::node() const {
    if (!node_) throw UsageError("access to an undefined DiffValue");
    return *node_;
}

bool DiffValue::is_leaf() const { return !node().backward; }
const Tensor& DiffValue::value() const { return node().value; }
Tensor& DiffValue::value() { return node().value; }
const Tensor& DiffValue::grad() const { return node().ensure_grad(); }
Tensor& DiffValue::grad() { return node().ensure_grad(); }
const std::string& DiffValue::name() const { return node().name; }

double DiffValue::item() const {
    const Tensor& v = value();
    if (v.size() != 1) throw UsageError("item() on a tensor of shape " + to_string(v.shape()));
    return v[0];
}

void DiffValue::zero_grad() { node().ensure_grad().fill(0.0); }

void backward(const DiffValue& loss) {
    if (!loss.defined()) throw UsageError("backward() called before any forward computation");
    if (loss.is_leaf())
        throw UsageError("backward() requires a value produced by a recorded forward computation");
    if (loss.value().size() != 1)
        throw UsageError("backward() requires a scalar loss, got shape " + to_string(loss.shape()));
    if (!loss.value().all_finite()) throw NumericError("backward() on a non-finite loss");

    // Iterative post-order DFS gives a topological order (parents before children).
    using Node = DiffValue::Node;
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{&loss.node(), 0}};
    seen.insert(&loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order)
        if (n->backward) n->ensure_grad().fill(0.0);
    loss.node().grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->backward) continue;
        for (auto& p : n->parents) p->ensure_grad();
        n->backward(*n);
    }
}

}  // namespace sgmil::diffnet

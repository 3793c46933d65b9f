#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dasmae/numerics/ndarray.hpp"

namespace dasmae::num {

namespace detail {
inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Disables tape recording for its lifetime (frozen-encoder feature extraction).
class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

template <typename T>
struct Node {
    NdArray<T> value;
    NdArray<T> grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::string name;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    // Zero-filled gradient buffer, allocated on first use.
    NdArray<T>& grad_buffer() {
        if (!has_grad) {
            grad = NdArray<T>(value.shape());
            has_grad = true;
        }
        return grad;
    }
};

/// Handle to a value on the gradient tape. Copies share the underlying node.
template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(NdArray<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }
    explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    const NdArray<T>& value() const { return node_->value; }
    NdArray<T>& value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }

    // Gradient accumulated by backward(); zeros if nothing reached this node.
    const NdArray<T>& grad() const { return node_->grad_buffer(); }
    NdArray<T>& grad() { return node_->grad_buffer(); }

    bool requires_grad() const { return node_->requires_grad; }
    const std::string& name() const { return node_->name; }
    const std::shared_ptr<Node<T>>& node() const { return node_; }
    bool defined() const { return static_cast<bool>(node_); }

    void zero_grad() {
        if (node_->has_grad) node_->grad.fill(T{0});
    }

private:
    std::shared_ptr<Node<T>> node_;
};

/// Named leaf with a zero-initialized gradient of the same shape.
template <typename T>
Var<T> make_parameter(std::string name, NdArray<T> value) {
    Var<T> p(std::move(value), true);
    p.node()->name = std::move(name);
    p.node()->grad_buffer();
    return p;
}

/// Builds an op result. The backward closure is kept only when recording is on
/// and some input needs a gradient.
template <typename T>
Var<T> make_result(NdArray<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    if (grad_enabled()) {
        bool needs = false;
        for (const auto& in : inputs) needs = needs || in.requires_grad();
        if (needs) {
            node->requires_grad = true;
            node->parents.reserve(inputs.size());
            for (auto& in : inputs) node->parents.push_back(in.node());
            node->backward = std::move(backward);
        }
    }
    return Var<T>(std::move(node));
}

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
/// reachable node that requires one.
template <typename T>
void backward(const Var<T>& loss) {
    if (loss.value().size() != 1) {
        throw ContractError("backward: loss must be a scalar, got shape " + shape_string(loss.shape()));
    }
    if (!loss.requires_grad()) return;

    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->grad_buffer()[0] += T{1};
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = *it;
        if (node->backward && node->has_grad) node->backward(*node);
    }
}

}  // namespace dasmae::num

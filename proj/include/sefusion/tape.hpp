#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sefusion/tensor.hpp"

namespace sefusion {

using NodeId = int32_t;

/// Gradients resulting from one backward pass. Leaf gradients are always
/// materialized for every requires_grad leaf (zeros when the leaf never
/// reached the loss); interior gradients are kept too, which is what the
/// class-activation maps read.
template <typename T>
class Gradients {
public:
    /// Gradient of the loss w.r.t. node `id`, or nullptr when none flowed.
    const Tensor<T>* grad(NodeId id) const {
        auto it = grads_.find(id);
        return it == grads_.end() ? nullptr : &it->second;
    }

    /// Leaf gradient; zero tensor of the leaf's shape when untouched.
    const Tensor<T>& leaf_grad(NodeId id) const {
        auto it = grads_.find(id);
        if (it == grads_.end())
            throw ContractError("node " + std::to_string(id) +
                                " is not a requires_grad leaf of this tape");
        return it->second;
    }

private:
    template <typename>
    friend class GradTape;
    std::unordered_map<NodeId, Tensor<T>> grads_;
};

/// Record of executed operations over tensors. Creation order is a
/// topological order (an op can only consume already-recorded nodes), so the
/// backward pass is a single reverse sweep. One tape per thread, replayable
/// exactly once.
template <typename T>
class GradTape {
public:
    /// Accumulates local gradients into the parents of one node.
    struct BackwardCtx {
        const Tensor<T>& upstream;                 // dLoss/dOutput of this node
        const Tensor<T>& out;                      // forward output
        const std::vector<const Tensor<T>*>& in;   // forward inputs
        // Accumulation target for parent k; null when that parent does not
        // need a gradient (lets ops skip dead work, e.g. dX of the first conv).
        std::vector<Tensor<T>*> parent_grad;
    };
    using BackwardFn = std::function<void(BackwardCtx&)>;

    GradTape() = default;
    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;

    NodeId leaf(Tensor<T> value) {
        bool rg = value.requires_grad;
        return push(std::move(value), {}, nullptr, rg);
    }

    NodeId leaf(const Tensor<T>& value, bool requires_grad) {
        Tensor<T> copy = value;
        copy.requires_grad = requires_grad;
        return push(std::move(copy), {}, nullptr, requires_grad);
    }

    /// Record an op: forward value, parents, and the backward closure.
    NodeId record(Tensor<T> value, std::vector<NodeId> parents, BackwardFn fn) {
        bool ng = false;
        for (NodeId p : parents) ng = ng || nodes_[check(p)].needs_grad;
        return push(std::move(value), std::move(parents), std::move(fn), ng);
    }

    const Tensor<T>& value(NodeId id) const { return nodes_[check(id)].value; }
    size_t size() const { return nodes_.size(); }

    /// Reverse-mode sweep from a scalar loss. Consumes the tape.
    Gradients<T> backward(NodeId loss) {
        if (consumed_) throw StateError("tape already consumed by a backward pass");
        const Node& ln = nodes_[check(loss)];
        if (ln.value.numel() != 1)
            throw ContractError("backward requires a scalar loss, got " + ln.value.shape.str());
        consumed_ = true;

        std::vector<Tensor<T>> grad(nodes_.size());
        std::vector<bool> has_grad(nodes_.size(), false);
        grad[static_cast<size_t>(loss)] = Tensor<T>::full(ln.value.shape, T(1));
        has_grad[static_cast<size_t>(loss)] = true;

        for (NodeId id = loss; id >= 0; --id) {
            size_t i = static_cast<size_t>(id);
            const Node& n = nodes_[i];
            if (!has_grad[i] || !n.backward || !n.needs_grad) continue;

            std::vector<const Tensor<T>*> in;
            in.reserve(n.parents.size());
            for (NodeId p : n.parents) in.push_back(&nodes_[static_cast<size_t>(p)].value);

            BackwardCtx ctx{grad[i], n.value, in, {}};
            ctx.parent_grad.resize(n.parents.size(), nullptr);
            for (size_t k = 0; k < n.parents.size(); ++k) {
                size_t p = static_cast<size_t>(n.parents[k]);
                if (!nodes_[p].needs_grad) continue;
                if (!has_grad[p]) {
                    grad[p] = Tensor<T>::zeros(nodes_[p].value.shape);
                    has_grad[p] = true;
                }
                ctx.parent_grad[k] = &grad[p];
            }
            n.backward(ctx);
        }

        Gradients<T> out;
        for (size_t i = 0; i < nodes_.size(); ++i) {
            const Node& n = nodes_[i];
            if (n.is_leaf && n.value.requires_grad) {
                out.grads_.emplace(static_cast<NodeId>(i),
                                   has_grad[i] ? std::move(grad[i])
                                               : Tensor<T>::zeros(n.value.shape));
            } else if (has_grad[i]) {
                out.grads_.emplace(static_cast<NodeId>(i), std::move(grad[i]));
            }
        }
        return out;
    }

private:
    struct Node {
        Tensor<T> value;
        std::vector<NodeId> parents;
        BackwardFn backward;
        bool needs_grad = false;  // on a path from a requires_grad leaf
        bool is_leaf = false;
    };

    NodeId push(Tensor<T> value, std::vector<NodeId> parents, BackwardFn fn, bool needs_grad) {
        Node n;
        n.is_leaf = parents.empty() && !fn;
        n.value = std::move(value);
        n.parents = std::move(parents);
        n.backward = std::move(fn);
        n.needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    size_t check(NodeId id) const {
        if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
            throw ContractError("node id " + std::to_string(id) + " is not on this tape");
        return static_cast<size_t>(id);
    }

    // Deque keeps node references stable while ops append to the tape.
    std::deque<Node> nodes_;
    bool consumed_ = false;
};

}  // namespace sefusion

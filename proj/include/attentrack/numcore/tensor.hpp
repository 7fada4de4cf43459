// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace attentrack::numcore {

/// Row/column extent of a dense 2-D tensor. Vectors are 1×k rows and
/// scalars are 1×1; nothing in this library needs higher rank.
struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const noexcept { return rows * cols; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until a backward pass touches the node
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward;

    bool is_leaf() const noexcept { return parents.empty(); }
    void ensure_grad() {
        if (grad.size() != data.size()) {
            grad.assign(data.size(), 0.0);
        }
    }
};

}  // namespace detail

/// Dense row-major tensor of doubles with optional gradient tracking.
///
/// A Tensor is a cheap handle; copies share storage and graph position.
/// Operations on tensors that require gradients record their inputs so that
/// `backward()` can traverse the graph in reverse topological order.
class Tensor {
public:
    Tensor();

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor full(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
    static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor row(std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor identity(std::size_t n);

    const Shape& shape() const noexcept { return node_->shape; }
    std::size_t rows() const noexcept { return node_->shape.rows; }
    std::size_t cols() const noexcept { return node_->shape.cols; }
    std::size_t size() const noexcept { return node_->data.size(); }
    bool empty() const noexcept { return node_->data.empty(); }

    std::span<const double> data() const noexcept { return node_->data; }
    /// Direct write access. Only meaningful on leaves (parameters, inputs);
    /// editing an interior node does not re-run the graph.
    std::span<double> mutable_data() noexcept { return node_->data; }

    double at(std::size_t r, std::size_t c) const;
    double& at(std::size_t r, std::size_t c);
    /// Value of a 1×1 tensor.
    double item() const;
    std::span<const double> row_span(std::size_t r) const;

    bool requires_grad() const noexcept { return node_->requires_grad; }
    void set_requires_grad(bool on) noexcept { node_->requires_grad = on; }
    bool has_grad() const noexcept { return !node_->grad.empty(); }
    std::span<const double> grad() const noexcept { return node_->grad; }
    void zero_grad() noexcept { node_->grad.clear(); }

    /// New leaf holding a copy of the values; no graph connection.
    Tensor detach() const;
    /// Deep copy that keeps requires_grad but drops graph history and grads.
    Tensor clone() const;

    bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

    const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node);

private:
    std::shared_ptr<detail::Node> node_;
};

/// Reverse-topological replay record of the graph feeding a scalar loss.
class Tape {
public:
    /// Nodes in topological order: every node appears after all its parents.
    const std::vector<detail::Node*>& order() const noexcept { return order_; }
    std::size_t size() const noexcept { return order_.size(); }

    static Tape record(const Tensor& root);

private:
    std::vector<detail::Node*> order_;
};

/// While alive, operations on this thread record no graph (inference mode).
class NoGradGuard {
public:
    NoGradGuard() noexcept;
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled() noexcept;

/// Populates `grad` of every requires-grad tensor reachable from `loss`.
/// Leaf gradients accumulate across calls; interior gradients are reset.
/// Throws ContractError if `loss` is not 1×1.
void backward(const Tensor& loss);

}  // namespace attentrack::numcore

// SPDX-License-Identifier: Apache-2.0
#include "attentrack/numcore/tensor.hpp"

#include <unordered_set>

#include "attentrack/error.hpp"

namespace attentrack::numcore {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() noexcept : previous_(g_grad_enabled) {
    g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() {
    g_grad_enabled = previous_;
}

bool grad_enabled() noexcept {
    return g_grad_enabled;
}

std::string to_string(const Shape& shape) {
    return std::to_string(shape.rows) + "x" + std::to_string(shape.cols);
}

Tensor::Tensor() : node_(std::make_shared<detail::Node>()) {}

Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    return full(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
    auto node = std::make_shared<detail::Node>();
    node->shape = {rows, cols};
    node->data.assign(rows * cols, value);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values,
                    bool requires_grad) {
    if (values.size() != rows * cols) {
        throw DimensionError("Tensor::from: " + std::to_string(values.size()) +
                             " values do not fill shape " + to_string(Shape{rows, cols}));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = {rows, cols};
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
    const std::size_t n = values.size();
    return from(1, n, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from(1, 1, {value}, requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
    Tensor out = zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        out.at(i, i) = 1.0;
    }
    return out;
}

double Tensor::at(std::size_t r, std::size_t c) const {
    if (r >= rows() || c >= cols()) {
        throw IndexError("Tensor::at(" + std::to_string(r) + ", " + std::to_string(c) +
                         ") out of range for shape " + to_string(shape()));
    }
    return node_->data[r * cols() + c];
}

double& Tensor::at(std::size_t r, std::size_t c) {
    if (r >= rows() || c >= cols()) {
        throw IndexError("Tensor::at(" + std::to_string(r) + ", " + std::to_string(c) +
                         ") out of range for shape " + to_string(shape()));
    }
    return node_->data[r * cols() + c];
}

double Tensor::item() const {
    if (size() != 1) {
        throw DimensionError("Tensor::item on non-scalar shape " + to_string(shape()));
    }
    return node_->data[0];
}

std::span<const double> Tensor::row_span(std::size_t r) const {
    if (r >= rows()) {
        throw IndexError("Tensor::row_span row " + std::to_string(r) + " out of range for shape " +
                         to_string(shape()));
    }
    return std::span<const double>(node_->data).subspan(r * cols(), cols());
}

Tensor Tensor::detach() const {
    return from(rows(), cols(), node_->data, false);
}

Tensor Tensor::clone() const {
    return from(rows(), cols(), node_->data, node_->requires_grad);
}

Tape Tape::record(const Tensor& root) {
    Tape tape;
    std::unordered_set<const detail::Node*> visited;
    // Iterative post-order DFS; graphs from long training loops get deep.
    struct Frame {
        detail::Node* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root.node().get(), 0});
    visited.insert(root.node().get());
    while (!stack.empty()) {
        Frame& top = stack.back();
        if (top.next_parent < top.node->parents.size()) {
            detail::Node* parent = top.node->parents[top.next_parent++].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.push_back({parent, 0});
            }
            continue;
        }
        tape.order_.push_back(top.node);
        stack.pop_back();
    }
    return tape;
}

void backward(const Tensor& loss) {
    if (loss.shape() != Shape{1, 1}) {
        throw ContractError("backward: loss must be 1x1, got " + to_string(loss.shape()));
    }
    if (!loss.requires_grad()) {
        return;
    }
    const Tape tape = Tape::record(loss);
    for (detail::Node* node : tape.order()) {
        if (!node->is_leaf()) {
            node->grad.assign(node->data.size(), 0.0);
        }
    }
    detail::Node& root = *loss.node();
    root.ensure_grad();
    root.grad[0] += 1.0;
    const auto& order = tape.order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->backward) {
            node->backward(*node);
        }
    }
}

}  // namespace attentrack::numcore

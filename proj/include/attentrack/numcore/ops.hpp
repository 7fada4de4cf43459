// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "attentrack/numcore/tensor.hpp"

namespace attentrack::numcore {

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a · bᵀ without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise (identical shapes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);

/// x + bias broadcast over rows; bias is 1×cols.
Tensor add_row(const Tensor& x, const Tensor& bias);

// Reductions to 1×1.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Row-wise softmax over the last axis.
Tensor softmax(const Tensor& x);
/// Row-wise layer normalization followed by gamma ⊙ x̂ + beta (both 1×cols).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-10);

/// −log softmax(logits)[target] for a 1×k logits row.
Tensor cross_entropy(const Tensor& logits, std::size_t target);
/// Mean over rows of the per-row cross entropy.
Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> targets);

/// Stacks row blocks vertically; all inputs share the column count.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_rows(const Tensor& top, const Tensor& bottom);
/// Gathers the listed rows (repeats allowed).
Tensor select_rows(const Tensor& x, std::span<const std::size_t> rows);
/// Row i of the result is a's row when take_a[i], otherwise b's row. Values
/// are copied, so selected rows are bitwise identical to their source.
Tensor where_rows(const std::vector<bool>& take_a, const Tensor& a, const Tensor& b);

}  // namespace attentrack::numcore

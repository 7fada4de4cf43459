// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "attentrack/numcore/optim.hpp"
#include "attentrack/numcore/tensor.hpp"
#include "attentrack/rng.hpp"

namespace attentrack::nn {

using numcore::NamedParameter;
using numcore::Tensor;

/// Xavier-uniform d_in×d_out weight that requires grad.
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Single-head cross attention with post-norm residual:
///   out = LayerNorm(queries + softmax(Qp·Kpᵀ / scale) · Vp · W_out)
/// with Qp = queries·W_q, Kp = keyvals·W_k, Vp = keyvals·W_v.
struct CrossAttentionLayer {
    Tensor w_q;
    Tensor w_k;
    Tensor w_v;
    Tensor w_out;
    Tensor ln_gamma;
    Tensor ln_beta;
    double scale = 1.0;
    bool residual = true;

    static CrossAttentionLayer create(std::size_t width, Rng& rng);

    std::size_t width() const noexcept { return w_q.rows(); }
    void collect(const std::string& prefix, std::vector<NamedParameter>& out) const;
};

/// Throws ContractError when keyvals is empty; callers own the no-context
/// path (see qem::enhance_queries).
Tensor cross_attend(const CrossAttentionLayer& layer, const Tensor& queries, const Tensor& keyvals);

/// Row-stochastic attention weights softmax(Qp·Kpᵀ / scale), n×m.
Tensor attention_weights(const CrossAttentionLayer& layer, const Tensor& queries,
                         const Tensor& keyvals);

/// affine → ReLU → affine, applied row-wise.
struct Mlp2 {
    Tensor w1;
    Tensor b1;
    Tensor w2;
    Tensor b2;

    static Mlp2 create(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);

    std::size_t in_width() const noexcept { return w1.rows(); }
    std::size_t hidden_width() const noexcept { return w1.cols(); }
    std::size_t out_width() const noexcept { return w2.cols(); }
    void collect(const std::string& prefix, std::vector<NamedParameter>& out) const;
};

Tensor mlp2_forward(const Mlp2& mlp, const Tensor& x);

/// Learned affine lift of (sin θ, cos θ) to the model width.
struct HeadingEmbedding {
    Tensor weight;  // 2×d
    Tensor bias;    // 1×d

    static HeadingEmbedding create(std::size_t width, Rng& rng);

    std::size_t width() const noexcept { return weight.cols(); }
    void collect(const std::string& prefix, std::vector<NamedParameter>& out) const;
};

/// 1×d embedding of one heading angle; throws InputError on non-finite θ.
Tensor heading_embed(const HeadingEmbedding& embedding, double theta);
/// One row per heading.
Tensor heading_embed_rows(const HeadingEmbedding& embedding, std::span<const double> thetas);

}  // namespace attentrack::nn

// SPDX-License-Identifier: Apache-2.0
#include "attentrack/nn/attention.hpp"

#include <cmath>

#include "attentrack/error.hpp"
#include "attentrack/numcore/ops.hpp"

namespace attentrack::nn {

using namespace numcore;

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> values(fan_in * fan_out);
    for (double& v : values) {
        v = rng.uniform(-limit, limit);
    }
    return Tensor::from(fan_in, fan_out, std::move(values), true);
}

CrossAttentionLayer CrossAttentionLayer::create(std::size_t width, Rng& rng) {
    if (width == 0) {
        throw ConfigError("CrossAttentionLayer: width must be positive");
    }
    CrossAttentionLayer layer;
    layer.w_q = xavier_uniform(width, width, rng);
    layer.w_k = xavier_uniform(width, width, rng);
    layer.w_v = xavier_uniform(width, width, rng);
    layer.w_out = xavier_uniform(width, width, rng);
    layer.ln_gamma = Tensor::full(1, width, 1.0, true);
    layer.ln_beta = Tensor::zeros(1, width, true);
    layer.scale = std::sqrt(static_cast<double>(width));
    return layer;
}

void CrossAttentionLayer::collect(const std::string& prefix,
                                  std::vector<NamedParameter>& out) const {
    out.push_back({prefix + ".w_q", w_q});
    out.push_back({prefix + ".w_k", w_k});
    out.push_back({prefix + ".w_v", w_v});
    out.push_back({prefix + ".w_out", w_out});
    out.push_back({prefix + ".ln_gamma", ln_gamma});
    out.push_back({prefix + ".ln_beta", ln_beta});
}

namespace {

void check_attention_inputs(const CrossAttentionLayer& layer, const Tensor& queries,
                            const Tensor& keyvals) {
    const std::size_t d = layer.width();
    if (keyvals.rows() == 0) {
        throw ContractError("cross_attend: empty key/value context; use the passthrough path");
    }
    if (queries.cols() != d || keyvals.cols() != d) {
        throw DimensionError("cross_attend: queries " + to_string(queries.shape()) +
                             " and keyvals " + to_string(keyvals.shape()) +
                             " must both have width " + std::to_string(d));
    }
    if (!(layer.scale > 0.0)) {
        throw ContractError("cross_attend: scale must be positive");
    }
}

}  // namespace

Tensor attention_weights(const CrossAttentionLayer& layer, const Tensor& queries,
                         const Tensor& keyvals) {
    check_attention_inputs(layer, queries, keyvals);
    const Tensor q = matmul(queries, layer.w_q);
    const Tensor k = matmul(keyvals, layer.w_k);
    return softmax(scale(matmul_nt(q, k), 1.0 / layer.scale));
}

Tensor cross_attend(const CrossAttentionLayer& layer, const Tensor& queries,
                    const Tensor& keyvals) {
    const Tensor weights = attention_weights(layer, queries, keyvals);
    const Tensor v = matmul(keyvals, layer.w_v);
    const Tensor mixed = matmul(matmul(weights, v), layer.w_out);
    const Tensor pre_norm = layer.residual ? add(queries, mixed) : mixed;
    return layer_norm(pre_norm, layer.ln_gamma, layer.ln_beta);
}

Mlp2 Mlp2::create(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
    if (in == 0 || hidden == 0 || out == 0) {
        throw ConfigError("Mlp2: widths must be positive");
    }
    Mlp2 mlp;
    mlp.w1 = xavier_uniform(in, hidden, rng);
    mlp.b1 = Tensor::zeros(1, hidden, true);
    mlp.w2 = xavier_uniform(hidden, out, rng);
    mlp.b2 = Tensor::zeros(1, out, true);
    return mlp;
}

void Mlp2::collect(const std::string& prefix, std::vector<NamedParameter>& out) const {
    out.push_back({prefix + ".w1", w1});
    out.push_back({prefix + ".b1", b1});
    out.push_back({prefix + ".w2", w2});
    out.push_back({prefix + ".b2", b2});
}

Tensor mlp2_forward(const Mlp2& mlp, const Tensor& x) {
    if (x.cols() != mlp.in_width()) {
        throw DimensionError("mlp2_forward: input " + to_string(x.shape()) +
                             " does not match input width " + std::to_string(mlp.in_width()));
    }
    const Tensor hidden = relu(add_row(matmul(x, mlp.w1), mlp.b1));
    return add_row(matmul(hidden, mlp.w2), mlp.b2);
}

HeadingEmbedding HeadingEmbedding::create(std::size_t width, Rng& rng) {
    HeadingEmbedding embedding;
    embedding.weight = xavier_uniform(2, width, rng);
    embedding.bias = Tensor::zeros(1, width, true);
    return embedding;
}

void HeadingEmbedding::collect(const std::string& prefix, std::vector<NamedParameter>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

Tensor heading_embed(const HeadingEmbedding& embedding, double theta) {
    const double one[] = {theta};
    return heading_embed_rows(embedding, one);
}

Tensor heading_embed_rows(const HeadingEmbedding& embedding, std::span<const double> thetas) {
    std::vector<double> features;
    features.reserve(thetas.size() * 2);
    for (double theta : thetas) {
        if (!std::isfinite(theta)) {
            throw InputError("heading_embed: non-finite heading");
        }
        // Reduce first so θ and θ + 2π produce bitwise-equal features.
        const double wrapped = std::remainder(theta, 2.0 * M_PI);
        features.push_back(std::sin(wrapped));
        features.push_back(std::cos(wrapped));
    }
    const Tensor raw = Tensor::from(thetas.size(), 2, std::move(features));
    return add_row(matmul(raw, embedding.weight), embedding.bias);
}

}  // namespace attentrack::nn

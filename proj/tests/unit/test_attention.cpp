// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "attentrack/error.hpp"
#include "layer_checks.hpp"

using namespace attentrack;
using numcore::Tensor;

namespace {

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t) {
    Mat m(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
    return m;
}

Mat mm(const Mat& a, const Mat& b) {
    Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

// textbook single-head attention, written independently of the library ops
Mat reference_attention(const nn::CrossAttentionLayer& l, const Tensor& queries, const Tensor& keyvals) {
    const Mat x = to_mat(queries), kv = to_mat(keyvals);
    const Mat q = mm(x, to_mat(l.w_q)), k = mm(kv, to_mat(l.w_k)), v = mm(kv, to_mat(l.w_v));
    Mat attn(q.size(), std::vector<double>(k.size()));
    for (std::size_t i = 0; i < q.size(); ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < k.size(); ++j) {
            double s = 0;
            for (std::size_t c = 0; c < q[i].size(); ++c) s += q[i][c] * k[j][c];
            attn[i][j] = s / l.scale;
            mx = std::max(mx, attn[i][j]);
        }
        double z = 0;
        for (auto& a : attn[i]) z += (a = std::exp(a - mx));
        for (auto& a : attn[i]) a /= z;
    }
    Mat y = mm(mm(attn, v), to_mat(l.w_out));
    const auto g = l.ln_gamma.data(), b = l.ln_beta.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
        const std::size_t d = y[i].size();
        double mu = 0, var = 0;
        for (std::size_t c = 0; c < d; ++c) mu += (y[i][c] += x[i][c]);
        mu /= d;
        for (std::size_t c = 0; c < d; ++c) var += (y[i][c] - mu) * (y[i][c] - mu);
        var /= d;
        for (std::size_t c = 0; c < d; ++c) y[i][c] = g[c] * (y[i][c] - mu) / std::sqrt(var + 1e-10) + b[c];
    }
    return y;
}

}  // namespace

TEST(CrossAttention, MatchesReference) {
    Rng rng(11);
    auto layer = nn::CrossAttentionLayer::create(5, rng);
    for (double& g : layer.ln_gamma.mutable_data()) g = rng.uniform(0.5, 2.0);
    const Tensor q = check::random_input(3, 5, rng), kv = check::random_input(7, 5, rng);
    const Mat ref = reference_attention(layer, q, kv);
    const Tensor got = nn::cross_attend(layer, q, kv);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(got.at(i, j), ref[i][j], 1e-12);
}

TEST(CrossAttention, WeightsAreRowStochastic) {
    Rng rng(12);
    const auto layer = nn::CrossAttentionLayer::create(4, rng);
    const Tensor w = nn::attention_weights(layer, check::random_input(5, 4, rng), check::random_input(3, 4, rng));
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double s = 0;
        for (double v : w.row_span(i)) {
            EXPECT_GT(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-14);
    }
}

TEST(CrossAttention, KeyOrderDoesNotMatter) {
    Rng rng(13);
    const auto layer = nn::CrossAttentionLayer::create(4, rng);
    const Tensor q = check::random_input(2, 4, rng), kv = check::random_input(3, 4, rng);
    const std::vector<std::size_t> perm = {2, 0, 1};
    const Tensor a = nn::cross_attend(layer, q, kv);
    const Tensor b = nn::cross_attend(layer, q, numcore::select_rows(kv, perm));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-13);
}

TEST(CrossAttention, Errors) {
    Rng rng(14);
    const auto layer = nn::CrossAttentionLayer::create(4, rng);
    EXPECT_THROW(nn::cross_attend(layer, check::random_input(2, 4, rng), Tensor::zeros(0, 4)), ContractError);
    EXPECT_THROW(nn::cross_attend(layer, check::random_input(2, 3, rng), check::random_input(2, 4, rng)),
                 DimensionError);
    EXPECT_THROW(nn::CrossAttentionLayer::create(0, rng), ConfigError);
}

TEST(Mlp, ReluClipsHidden) {
    Rng rng(1);
    auto mlp = nn::Mlp2::create(2, 2, 1, rng);
    std::copy_n(std::begin({1.0, 0.0, 0.0, 1.0}), 4, mlp.w1.mutable_data().begin());
    std::copy_n(std::begin({2.0, 3.0}), 2, mlp.w2.mutable_data().begin());
    mlp.b2.mutable_data()[0] = 0.5;
    // hidden = relu([1, -4]) = [1, 0] → 2·1 + 0.5
    EXPECT_DOUBLE_EQ(nn::mlp2_forward(mlp, Tensor::row({1.0, -4.0})).item(), 2.5);
}

TEST(HeadingEmbedding, PeriodicAndFinite) {
    Rng rng(2);
    const auto emb = nn::HeadingEmbedding::create(4, rng);
    const Tensor a = nn::heading_embed(emb, 0.7);
    const Tensor b = nn::heading_embed(emb, 0.7 + 2.0 * M_PI);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-12);
    EXPECT_THROW(nn::heading_embed(emb, std::nan("")), InputError);
}

TEST(XavierUniform, WithinLimit) {
    Rng rng(5);
    const Tensor w = nn::xavier_uniform(10, 30, rng);
    const double limit = std::sqrt(6.0 / 40.0);
    for (double v : w.data()) {
        EXPECT_LE(std::abs(v), limit);
    }
    EXPECT_TRUE(w.requires_grad());
}

class LayerGradients : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(LayerGradients, FiniteDifferences) {
    for (const auto& c : check::check_all_layers(GetParam())) {
        EXPECT_TRUE(c.result.ok(1e-4)) << c.layer << ": " << c.result.worst_entry << " rel "
                                       << c.result.worst_relative;
        EXPECT_GT(c.result.checked, 0u) << c.layer;
    }
}

INSTANTIATE_TEST_SUITE_P(Seeds, LayerGradients, ::testing::Values(1, 2, 3));

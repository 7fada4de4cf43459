// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "attentrack/error.hpp"
#include "attentrack/pipeline/model.hpp"
#include "attentrack/qem/enhance.hpp"
#include "layer_checks.hpp"

using namespace attentrack;
using numcore::Tensor;

TEST(Qem, NoPreviousFeaturesPassesEverythingThrough) {
    Rng rng(1);
    const auto layer = nn::CrossAttentionLayer::create(4, rng);
    const Tensor qin = check::random_input(3, 4, rng);
    const auto out = qem::enhance_queries(layer, qin, Tensor::zeros(0, 4));
    EXPECT_TRUE(out.embeddings.same_node(qin));
    EXPECT_EQ(out.newborn_mask, std::vector<bool>(3, true));
}

TEST(Qem, NewbornRowsBitExactOthersAttended) {
    Rng rng(2);
    const auto layer = nn::CrossAttentionLayer::create(4, rng);
    const Tensor qin = check::random_input(3, 4, rng);
    const Tensor prev = check::random_input(2, 4, rng);
    const auto out = qem::enhance_queries(layer, qin, prev, {false, true, false});
    const Tensor attended = nn::cross_attend(layer, qin, prev);
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_EQ(out.embeddings.at(1, j), qin.at(1, j));
        EXPECT_EQ(out.embeddings.at(0, j), attended.at(0, j));
        EXPECT_EQ(out.embeddings.at(2, j), attended.at(2, j));
    }
}

TEST(Qem, NewbornRowGetsNoGradientFromLayer) {
    Rng rng(3);
    const auto layer = nn::CrossAttentionLayer::create(4, rng);
    const Tensor qin = check::random_input(2, 4, rng);
    const auto out = qem::enhance_queries(layer, qin, check::random_input(2, 4, rng), {true, true});
    EXPECT_TRUE(out.embeddings.same_node(qin));
}

TEST(Qem, MaskSizeChecked) {
    Rng rng(4);
    const auto layer = nn::CrossAttentionLayer::create(4, rng);
    EXPECT_THROW(qem::enhance_queries(layer, check::random_input(3, 4, rng), check::random_input(1, 4, rng), {true}),
                 DimensionError);
}

TEST(QemGate, DistanceThreshold) {
    const std::vector<sim::Vec2> dets = {{0, 0}, {5, 0}, {10, 1.9}};
    const std::vector<sim::Vec2> prev = {{1, 0}, {10, 0}};
    // 1 m, 4 m and 1.9 m from their nearest previous object
    EXPECT_EQ(pipeline::gate_qem(dets, prev, 2.0), (std::vector<bool>{false, true, false}));
    EXPECT_EQ(pipeline::gate_qem(dets, {}, 2.0), (std::vector<bool>{true, true, true}));
}

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "attentrack/error.hpp"
#include "attentrack/train/train.hpp"

using namespace attentrack;
using namespace attentrack::train;

namespace {

std::vector<sim::Scenario> small_pool(std::size_t n = 3) {
    sim::ScenarioConfig cfg;
    cfg.num_frames = 6;
    std::vector<sim::Scenario> pool;
    for (std::size_t i = 0; i < n; ++i) pool.push_back(sim::generate_scenario(cfg, 100 + i));
    return pool;
}

Model small_model(pipeline::Mode mode = pipeline::Mode::lidar_only) {
    pipeline::ModelConfig cfg;
    cfg.width = 8;
    cfg.hidden = 8;
    cfg.mode = mode;
    return Model::create(cfg);
}

TrainConfig short_run(Stage stage, std::size_t steps = 12) {
    TrainConfig tc;
    tc.stage = stage;
    tc.steps_per_epoch = steps;
    tc.seed = 5;
    tc.optim.max_lr = 5e-3;
    return tc;
}

std::vector<double> values_of(const Model& m, const std::string& group, bool in_group) {
    std::vector<double> out;
    for (const auto& p : m.parameters()) {
        if ((pipeline::group_of(p.name) == group) == in_group) {
            out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
        }
    }
    return out;
}

}  // namespace

TEST(Stages, TrainableGroups) {
    pipeline::ModelConfig cfg;
    EXPECT_EQ(trainable_groups(Stage::da_frozen, cfg), (std::vector<std::string>{"da"}));
    EXPECT_EQ(trainable_groups(Stage::encoder, cfg), (std::vector<std::string>{"encoder", "det_head", "qem", "coarse"}));
    const auto joint = trainable_groups(Stage::joint, cfg);
    EXPECT_EQ(std::count(joint.begin(), joint.end(), "encoder"), 0);
    cfg.da_transformer = false;
    EXPECT_TRUE(trainable_groups(Stage::da_frozen, cfg).empty());
    EXPECT_EQ(parse_stage("joint"), Stage::joint);
    EXPECT_THROW(parse_stage("stage4"), ConfigError);
}

TEST(Pairs, LabelsAndContext) {
    const auto pool = small_pool();
    Rng rng(1);
    for (int k = 0; k < 20; ++k) {
        const auto pair = sample_pair(pool, rng, 2);
        EXPECT_EQ(pair.labels, sim::label_associations(pair.prev, pair.curr));
        EXPECT_EQ(pair.curr.index, pair.prev.index + 1);
        EXPECT_LE(pair.context.size(), 2u);
        for (std::size_t i = 0; i < pair.context.size(); ++i) {
            EXPECT_EQ(pair.context[i].index + pair.context.size() - i, pair.prev.index);
        }
    }
    EXPECT_EQ(all_pairs(pool).size(), 3u * 5u);
    Rng r2(1);
    EXPECT_THROW(sample_pair({}, r2), ConfigError);
}

TEST(TrainStage, FrozenGroupsUntouched) {
    const auto pool = small_pool();
    Model model = small_model();
    const auto before_other = values_of(model, "da", false);
    const auto before_da = values_of(model, "da", true);
    const auto result = train_stage(model, short_run(Stage::da_frozen), pool);
    EXPECT_TRUE(result.finished());
    EXPECT_EQ(values_of(model, "da", false), before_other);
    EXPECT_NE(values_of(model, "da", true), before_da);
    for (const auto& p : model.parameters()) {
        EXPECT_TRUE(p.tensor.requires_grad()) << "freeze not restored on " << p.name;
    }
}

TEST(TrainStage, EncoderStageLeavesDaAlone) {
    const auto pool = small_pool();
    Model model = small_model();
    const auto before = values_of(model, "da", true);
    train_stage(model, short_run(Stage::encoder), pool);
    EXPECT_EQ(values_of(model, "da", true), before);
}

TEST(TrainStage, LossDecreasesOnTinyPool) {
    auto pool = small_pool(1);
    Model model = small_model();
    auto tc = short_run(Stage::da_frozen, 300);
    tc.optim.max_lr = 1e-2;
    const auto res = train_stage(model, tc, pool);
    double head = 0, tail = 0;
    for (std::size_t i = 0; i < 30; ++i) {
        head += res.curve[i].association;
        tail += res.curve[res.curve.size() - 1 - i].association;
    }
    EXPECT_LT(tail, 0.5 * head);
}

TEST(TrainStage, ResumeIsExact) {
    const auto pool = small_pool();
    const auto tc = short_run(Stage::joint, 10);
    Model full = small_model(pipeline::Mode::fusion);
    Model part = full.clone();
    const auto a = train_stage(full, tc, pool);
    const auto first = train_stage(part, tc, pool, nullptr, 4);
    EXPECT_FALSE(first.finished());
    EXPECT_EQ(first.progress.steps_done, 4u);
    // through a checkpoint file round trip, as the CLI does
    Checkpoint ck{part.clone(), {Stage::encoder, Stage::da_frozen}, first.progress, tc};
    Checkpoint back = checkpoint_from_json(checkpoint_to_json(ck));
    const auto rest = train_stage(back.model, tc, pool, &*back.in_progress);
    EXPECT_TRUE(rest.finished());
    ASSERT_EQ(rest.curve.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(rest.curve[i].step, a.curve[4 + i].step);
        EXPECT_EQ(rest.curve[i].loss, a.curve[4 + i].loss);
    }
    const auto pa = full.parameters(), pb = back.model.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_TRUE(std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pb[i].tensor.data().begin()))
            << pa[i].name;
    }
}

TEST(TrainStage, NoTransformerJointUsesDetectionOnly) {
    const auto pool = small_pool();
    pipeline::ModelConfig cfg;
    cfg.width = 8;
    cfg.hidden = 8;
    cfg.da_transformer = false;
    Model model = Model::create(cfg);
    const auto res = train_stage(model, short_run(Stage::joint, 5), pool);
    for (const auto& r : res.curve) {
        EXPECT_DOUBLE_EQ(r.loss, r.detection);
    }
    // nothing to train in stage 2 for this arm
    Model copy = model.clone();
    train_stage(copy, short_run(Stage::da_frozen, 3), pool);
    EXPECT_EQ(values_of(copy, "", false), values_of(model, "", false));
}

TEST(TrainStage, BadConfig) {
    Model model = small_model();
    auto tc = short_run(Stage::encoder, 0);
    EXPECT_THROW(train_stage(model, tc, small_pool()), ConfigError);
    StageProgress wrong{Stage::joint, 1, {}};
    EXPECT_THROW(train_stage(model, short_run(Stage::encoder), small_pool(), &wrong), ContractError);
}

TEST(Checkpoint, RoundTripExactAndValidated) {
    Model model = small_model(pipeline::Mode::fusion);
    Checkpoint ck{model, {Stage::encoder}, std::nullopt, short_run(Stage::encoder)};
    const auto j = checkpoint_to_json(ck);
    const Checkpoint back = checkpoint_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.model.config, model.config);
    EXPECT_EQ(back.completed_stages, ck.completed_stages);
    const auto pa = model.parameters(), pb = back.model.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_TRUE(std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pb[i].tensor.data().begin()));
    }
    auto bad = j;
    bad["schema"] = "something.else";
    EXPECT_THROW(checkpoint_from_json(bad), DataError);
    auto shape = j;
    shape["parameters"]["encoder.w1"]["shape"] = {1, 1};
    EXPECT_THROW(checkpoint_from_json(shape), DataError);
    auto missing = j;
    missing["parameters"].erase("da.q_cross.w_q");
    EXPECT_THROW(checkpoint_from_json(missing), DataError);
}

TEST(TrainConfigJson, RoundTripAndErrors) {
    auto tc = short_run(Stage::joint);
    tc.augment = true;
    tc.optim.weight_decay = 0.0;
    const auto back = train_config_from_json(train_config_to_json(tc));
    EXPECT_EQ(train_config_to_json(back), train_config_to_json(tc));
    EXPECT_THROW(train_config_from_json(nlohmann::json{{"epochz", 1}}), ConfigError);
}

TEST(LossCsv, Header) {
    std::ostringstream out;
    const LossRecord r{0, 1.5, 1.0, 0.5, 1e-3};
    write_loss_csv(out, std::span<const LossRecord>(&r, 1));
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "step,loss,association,detection,lr");
}

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sstream>

#include "attentrack/error.hpp"
#include "attentrack/metrics/mot.hpp"
#include "attentrack/sim/world.hpp"
#include "metric_cases.hpp"

using namespace attentrack;
using namespace attentrack::metrics;
using check::gt;
using check::pr;

TEST(MatchFrame, GreedyByDistance) {
    const std::vector<PredBox> preds = {pr(1, 1.0), pr(2, 0.2), pr(3, 50)};
    const std::vector<GtBox> gts = {gt(10, 0), gt(11, 1.3)};
    const auto r = match_frame(preds, gts, 2.0);
    // 2↔10 (0.2) first, then 1↔11 (0.3)
    ASSERT_EQ(r.matches.size(), 2u);
    EXPECT_EQ(r.matches[0].pred_id, 2);
    EXPECT_EQ(r.matches[0].gt_id, 10);
    EXPECT_EQ(r.matches[1].pred_id, 1);
    EXPECT_EQ(r.matches[1].gt_id, 11);
    EXPECT_EQ(r.false_positives, (std::vector<std::int64_t>{3}));
    EXPECT_TRUE(r.misses.empty());
    EXPECT_THROW(match_frame(preds, gts, 0.0), ContractError);
}

class HandCases : public ::testing::TestWithParam<std::size_t> {};

TEST_P(HandCases, ExactCounts) {
    const auto c = check::hand_cases().at(GetParam());
    const auto counts = evaluate_sequence(c.seq, 2.0);
    EXPECT_DOUBLE_EQ(mota(counts), c.mota) << c.name;
    EXPECT_EQ(counts.ids, c.ids) << c.name;
    EXPECT_EQ(counts.mostly_tracked, c.mt) << c.name;
    EXPECT_EQ(counts.mostly_lost, c.ml) << c.name;
}

INSTANTIATE_TEST_SUITE_P(All, HandCases, ::testing::Range<std::size_t>(0, 11));

TEST(Amota, TwoTrackCaseMatchesFormula) {
    const std::vector<Sequence> seqs = {check::two_track_case()};
    for (std::size_t n : {2u, 5u, 11u, 40u}) {
        AmotaConfig cfg;
        cfg.n_points = n;
        const auto report = compute_amota(seqs, cfg);
        ASSERT_TRUE(report.classes[0].has_value());
        EXPECT_NEAR(report.classes[0]->amota, check::two_track_amota(n), 1e-12) << n;
        EXPECT_NEAR(report.overall.amota, check::two_track_amota(n), 1e-12);
    }
}

TEST(Amota, PerfectAndEmpty) {
    const auto scenario = sim::generate_scenario(sim::ScenarioConfig::standard(), 4);
    const std::vector<Sequence> perfect = {oracle_sequence(scenario)};
    const auto r = compute_amota(perfect);
    EXPECT_DOUBLE_EQ(r.overall.amota, 1.0);
    EXPECT_DOUBLE_EQ(r.overall.mota, 1.0);
    EXPECT_EQ(r.overall.ids, 0u);
    EXPECT_DOUBLE_EQ(r.overall.amotp, 0.0);

    pipeline::TrackerOutput nothing(scenario.frames.size());
    for (std::size_t k = 0; k < nothing.size(); ++k) {
        nothing[k].frame_index = k;
        nothing[k].timestamp = scenario.frames[k].timestamp;
    }
    const std::vector<Sequence> empty = {make_sequence(scenario, nothing)};
    const auto e = compute_amota(empty);
    EXPECT_DOUBLE_EQ(e.overall.amota, 0.0);
    EXPECT_DOUBLE_EQ(e.overall.amotp, 2.0);
    EXPECT_DOUBLE_EQ(e.overall.recall, 0.0);
}

TEST(Amota, AbsentClassesLeftOut) {
    const std::vector<Sequence> seqs = {check::two_track_case()};
    const auto r = compute_amota(seqs);
    for (std::size_t c = 1; c < sim::kNumClasses; ++c) {
        EXPECT_FALSE(r.classes[c].has_value());
    }
    EXPECT_EQ(r.overall.gt, 4u);
}

TEST(Amota, OverallAveragesRatiosSumsCounts) {
    Sequence seq = check::two_track_case();
    seq[0].gts.push_back({50, ObjectClass::pedestrian, {-20, 0}});
    seq[1].gts.push_back({50, ObjectClass::pedestrian, {-20, 0}});
    seq[0].preds.push_back({60, ObjectClass::pedestrian, {-20, 0}, 0.8});
    const std::vector<Sequence> seqs = {seq};
    const auto r = compute_amota(seqs);
    const auto& car = *r.classes[0];
    const auto& ped = *r.classes[static_cast<std::size_t>(ObjectClass::pedestrian)];
    EXPECT_NEAR(r.overall.amota, (car.amota + ped.amota) / 2, 1e-15);
    EXPECT_NEAR(r.overall.mota, (car.mota + ped.mota) / 2, 1e-15);
    EXPECT_EQ(r.overall.gt, car.gt + ped.gt);
    EXPECT_EQ(r.overall.ml, car.ml + ped.ml);
}

TEST(Amota, JobsDoNotChangeResult) {
    std::vector<Sequence> seqs;
    for (std::uint64_t s = 0; s < 4; ++s) {
        seqs.push_back(oracle_sequence(sim::generate_scenario(sim::ScenarioConfig::standard(), s)));
        for (auto& f : seqs.back()) {
            for (auto& p : f.preds) p.position.x += 0.1 * double(p.track_id % 3);
        }
    }
    AmotaConfig one, four;
    four.jobs = 4;
    EXPECT_EQ(compute_amota(seqs, one), compute_amota(seqs, four));
}

TEST(Amota, ConfigErrors) {
    AmotaConfig bad;
    bad.n_points = 1;
    EXPECT_THROW(compute_amota({}, bad), ConfigError);
    bad.n_points = 40;
    bad.match_threshold_m = 0;
    EXPECT_THROW(compute_amota({}, bad), ConfigError);
}

TEST(Motar, ClampedToUnitInterval) {
    MotCounts c;
    c.gt = 10;
    c.fp = 30;
    EXPECT_EQ(motar(c, 0.5), 0.0);
    c.fp = 0;
    c.fn = 0;
    EXPECT_EQ(motar(c, 0.1), 1.0);
}

TEST(Report, JsonRoundTripAndCsv) {
    const std::vector<Sequence> seqs = {check::two_track_case()};
    const auto r = compute_amota(seqs);
    EXPECT_EQ(report_from_json(report_to_json(r)), r);
    std::ostringstream csv;
    write_report_csv(csv, r);
    const std::string s = csv.str();
    EXPECT_EQ(s.substr(0, s.find('\n')), "class,AMOTA,AMOTP,Recall,MOTAR,GT,MOTA,MOTP,MT,ML,FAF,IDS");
    EXPECT_NE(s.find("\ncar,"), std::string::npos);
    EXPECT_NE(s.find("\noverall,"), std::string::npos);
    EXPECT_EQ(s.find("truck"), std::string::npos);
}

TEST(MakeSequence, FrameCountMismatchIsDataError) {
    const auto scenario = sim::generate_scenario(sim::ScenarioConfig::standard(), 4);
    EXPECT_THROW(make_sequence(scenario, pipeline::TrackerOutput(3)), DataError);
}

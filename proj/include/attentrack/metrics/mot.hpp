// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "attentrack/pipeline/tracker.hpp"
#include "attentrack/sim/world.hpp"

namespace attentrack::metrics {

using sim::ObjectClass;
using sim::Vec2;

struct PredBox {
    std::int64_t track_id = 0;
    ObjectClass cls = ObjectClass::car;
    Vec2 position;
    double score = 1.0;
};

struct GtBox {
    std::int64_t gt_id = 0;
    ObjectClass cls = ObjectClass::car;
    Vec2 position;
};

struct FrameData {
    std::vector<PredBox> preds;
    std::vector<GtBox> gts;
};

/// One scenario's frames in time order. Ids are scoped to the sequence.
using Sequence = std::vector<FrameData>;

struct MatchPair {
    std::int64_t pred_id = 0;
    std::int64_t gt_id = 0;
    double distance = 0.0;
};

struct FrameMatchResult {
    std::vector<MatchPair> matches;
    std::vector<std::int64_t> false_positives;  // pred track ids
    std::vector<std::int64_t> misses;           // gt ids
    std::vector<std::int64_t> id_switches;      // gt ids whose matched pred id changed
};

/// Last matched pred id per gt id, carried from frame to frame.
using MatchHistory = std::unordered_map<std::int64_t, std::int64_t>;

/// Greedy one-to-one matching by ascending center distance (ties by pred then
/// gt index), keeping only pairs within `threshold_m`. When `history` is given
/// it is read to detect id switches and updated with this frame's matches.
/// Class is not looked at; callers filter per class beforehand.
FrameMatchResult match_frame(std::span<const PredBox> preds, std::span<const GtBox> gts,
                             double threshold_m, MatchHistory* history = nullptr);

/// Raw counts; merge() is associative so sequences can be accumulated apart.
struct MotCounts {
    std::size_t frames = 0;
    std::size_t gt = 0;  // gt boxes over all frames
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t ids = 0;
    double distance_sum = 0.0;
    std::size_t trajectories = 0;
    std::size_t mostly_tracked = 0;
    std::size_t mostly_lost = 0;

    void merge(const MotCounts& other);
    friend bool operator==(const MotCounts&, const MotCounts&) = default;
};

inline constexpr double kMostlyTracked = 0.8;
inline constexpr double kMostlyLost = 0.2;

/// Counts over one sequence's frame results. A gt trajectory is every frame in
/// which its id appears as matched or missed.
MotCounts accumulate(std::span<const FrameMatchResult> frames);

/// Matches every frame of a sequence (threading the id history) and
/// accumulates. Predictions scoring below `min_score` are ignored.
MotCounts evaluate_sequence(const Sequence& sequence, double threshold_m,
                            double min_score = -1.0);

double recall(const MotCounts& c);
double mota(const MotCounts& c);
/// Mean matched distance; `threshold_m` when nothing matched.
double motp(const MotCounts& c, double threshold_m);
double faf(const MotCounts& c, double normalization);
/// max(0, 1 − (IDS + FP + FN − (1 − r)·P) / (r·P)), clamped to at most 1.
double motar(const MotCounts& c, double r);

struct AmotaConfig {
    std::size_t n_points = 40;
    double match_threshold_m = 2.0;
    /// FAF = false positives per frame × normalization.
    double faf_normalization = 1.0;
    std::size_t jobs = 1;
};

struct ClassMetrics {
    double amota = 0.0;
    double amotp = 0.0;
    double recall = 0.0;
    double motar = 0.0;
    std::size_t gt = 0;
    double mota = 0.0;
    double motp = 0.0;
    std::size_t mt = 0;
    std::size_t ml = 0;
    double faf = 0.0;
    std::size_t ids = 0;
    /// MOTAR at each recall point k/(n−1), k = 1..n−1 (0 where unreachable).
    std::vector<double> motar_curve;

    friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct MetricsReport {
    std::size_t n_points = 40;
    double match_threshold_m = 2.0;
    /// nullopt for a class with no ground truth; such classes are left out of
    /// the overall average.
    std::array<std::optional<ClassMetrics>, sim::kNumClasses> classes;
    /// Mean of the per-class ratios, sums of the per-class counts.
    ClassMetrics overall;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Confidence sweep per class: for each recall point the highest score
/// threshold reaching it is found by bisection over the sorted distinct
/// scores, and MOTAR/MOTP are taken there. The remaining columns come from the
/// recall point with the best MOTA (all predictions when none is reachable).
MetricsReport compute_amota(std::span<const Sequence> sequences, const AmotaConfig& config = {});

/// Pairs tracker output with the scenario's ego-frame ground truth.
/// Throws DataError when the frame counts differ.
Sequence make_sequence(const sim::Scenario& scenario, const pipeline::TrackerOutput& output);
/// Predictions are the ground truth itself, ids = gt ids, score 1.
Sequence oracle_sequence(const sim::Scenario& scenario);

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
/// One row per present class plus `overall`, Table-4 column order.
void write_report_csv(std::ostream& out, const MetricsReport& report);

}  // namespace attentrack::metrics

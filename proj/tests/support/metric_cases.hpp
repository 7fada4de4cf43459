// SPDX-License-Identifier: Apache-2.0
// Hand-built mini scenarios with their hand-counted CLEAR MOT values.
#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "attentrack/metrics/mot.hpp"

namespace attentrack::check {

struct HandCase {
    std::string name;
    metrics::Sequence seq;
    double mota;
    std::size_t ids;
    std::size_t mt;
    std::size_t ml;
};

inline metrics::GtBox gt(std::int64_t id, double x, double y = 0.0) {
    return {id, metrics::ObjectClass::car, {x, y}};
}
inline metrics::PredBox pr(std::int64_t id, double x, double y = 0.0, double score = 1.0) {
    return {id, metrics::ObjectClass::car, {x, y}, score};
}

// threshold 2 m throughout
inline std::vector<HandCase> hand_cases() {
    using metrics::FrameData;
    std::vector<HandCase> cases;
    // P=6, no errors
    cases.push_back({"perfect", {{{pr(1, 0), pr(2, 10)}, {gt(0, 0), gt(1, 10)}},
                                 {{pr(1, 1), pr(2, 11)}, {gt(0, 1), gt(1, 11)}},
                                 {{pr(1, 2), pr(2, 12)}, {gt(0, 2), gt(1, 12)}}},
                     1.0, 0, 2, 0});
    // P=4, FN=4
    cases.push_back({"all_missed", {{{}, {gt(0, 0)}}, {{}, {gt(0, 1)}}, {{}, {gt(0, 2)}}, {{}, {gt(0, 3)}}}, 0.0, 0, 0, 1});
    // P=2, FP=2
    cases.push_back({"false_positives", {{{pr(1, 0), pr(9, 30)}, {gt(0, 0)}}, {{pr(1, 0), pr(9, 30)}, {gt(0, 0)}}},
                     0.0, 0, 1, 0});
    // P=4, one handover 7 → 8
    cases.push_back({"single_switch", {{{pr(7, 0)}, {gt(0, 0)}}, {{pr(7, 1)}, {gt(0, 1)}},
                                       {{pr(8, 2)}, {gt(0, 2)}}, {{pr(8, 3)}, {gt(0, 3)}}},
                     0.75, 1, 1, 0});
    // P=3, 7 → 8 → 7 counts twice
    cases.push_back({"switch_back", {{{pr(7, 0)}, {gt(0, 0)}}, {{pr(8, 1)}, {gt(0, 1)}}, {{pr(7, 2)}, {gt(0, 2)}}},
                     1.0 - 2.0 / 3.0, 2, 1, 0});
    // P=3, FN=1; same id after the gap is no switch; 2/3 tracked
    cases.push_back({"gap_same_id", {{{pr(7, 0)}, {gt(0, 0)}}, {{}, {gt(0, 1)}}, {{pr(7, 2)}, {gt(0, 2)}}},
                     2.0 / 3.0, 0, 0, 0});
    // P=3, FN=1, IDS=1 across the gap
    cases.push_back({"gap_new_id", {{{pr(7, 0)}, {gt(0, 0)}}, {{}, {gt(0, 1)}}, {{pr(8, 2)}, {gt(0, 2)}}},
                     1.0 / 3.0, 1, 0, 0});
    // P=4, two tracks swap targets
    cases.push_back({"crossing_swap", {{{pr(1, 0), pr(2, 1.5)}, {gt(0, 0), gt(1, 1.5)}},
                                       {{pr(1, 1.5), pr(2, 0)}, {gt(0, 0), gt(1, 1.5)}}},
                     0.5, 2, 2, 0});
    // P=2: 2.0 m matches, 2.01 m does not (FP+FN)
    cases.push_back({"gate_boundary", {{{pr(1, 2.0)}, {gt(0, 0)}}, {{pr(1, 2.01)}, {gt(0, 0)}}}, 0.0, 0, 0, 0});
    // P=15: A 4/5 (MT), B 1/5 (ML), C 3/5; FN=7
    {
        metrics::Sequence seq(5);
        for (std::size_t k = 0; k < 5; ++k) {
            seq[k].gts = {gt(0, 0), gt(1, 10), gt(2, 20)};
            if (k < 4) seq[k].preds.push_back(pr(1, 0));
            if (k == 0) seq[k].preds.push_back(pr(2, 10));
            if (k >= 2) seq[k].preds.push_back(pr(3, 20));
        }
        cases.push_back({"mostly_tracked_lost", seq, 8.0 / 15.0, 0, 1, 1});
    }
    // P=2: nearer of two predictions wins, the other is a false positive
    cases.push_back({"nearest_wins", {{{pr(1, 1.5), pr(2, 0.5)}, {gt(0, 0)}}, {{pr(1, 1.5), pr(2, 0.5)}, {gt(0, 0)}}},
                     0.0, 0, 1, 0});
    return cases;
}

/// Two ground-truth tracks over two frames (P = 4): track 1 (score 0.9)
/// covers gt 0 throughout, track 2 (0.6) covers gt 1 only in frame 0, and
/// track 9 (0.95) is a false positive in frame 1.
inline metrics::Sequence two_track_case() {
    return {{{pr(1, 0, 0, 0.9), pr(2, 10, 0, 0.6)}, {gt(0, 0), gt(1, 10)}},
            {{pr(1, 1, 0, 0.9), pr(9, 30, 0, 0.95)}, {gt(0, 1), gt(1, 11)}}};
}

/// AMOTA of two_track_case from the formula. Counts per score threshold,
/// tallied by hand:
///   ≥0.95: TP 0, FP 1, FN 4 (recall 0)
///   ≥0.9 : TP 2, FP 1, FN 2 (recall 1/2)
///   ≥0.6 : TP 3, FP 1, FN 1 (recall 3/4)   ≥0.6 and ≥0.95 differ only by TP
/// Each recall point r uses the highest threshold reaching it; MOTAR =
/// max(0, min(1, 1 − (IDS+FP+FN − (1−r)P)/(rP))); unreachable points give 0.
inline double two_track_amota(std::size_t n_points) {
    const double P = 4.0;
    double total = 0.0;
    const std::size_t L = n_points - 1;
    for (std::size_t k = 1; k <= L; ++k) {
        const double r = double(k) / double(L);
        double errors;
        if (r <= 0.5) errors = 1 + 2;
        else if (r <= 0.75) errors = 1 + 1;
        else continue;
        total += std::clamp(1.0 - (errors - (1.0 - r) * P) / (r * P), 0.0, 1.0);
    }
    return total / double(L);
}

}  // namespace attentrack::check

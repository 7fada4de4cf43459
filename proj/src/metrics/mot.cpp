// SPDX-License-Identifier: Apache-2.0
#include "attentrack/metrics/mot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <tuple>

#include "attentrack/error.hpp"
#include "attentrack/parallel.hpp"

namespace attentrack::metrics {

using nlohmann::json;

FrameMatchResult match_frame(std::span<const PredBox> preds, std::span<const GtBox> gts,
                             double threshold_m, MatchHistory* history) {
    if (!(threshold_m > 0.0)) {
        throw ContractError("match_frame: threshold must be positive");
    }
    struct Candidate {
        double distance;
        std::size_t pred;
        std::size_t gt;
    };
    std::vector<Candidate> candidates;
    for (std::size_t p = 0; p < preds.size(); ++p) {
        for (std::size_t g = 0; g < gts.size(); ++g) {
            const double d = sim::distance(preds[p].position, gts[g].position);
            if (d <= threshold_m) {
                candidates.push_back({d, p, g});
            }
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(a.distance, a.pred, a.gt) < std::tie(b.distance, b.pred, b.gt);
    });

    std::vector<bool> pred_used(preds.size(), false);
    std::vector<bool> gt_used(gts.size(), false);
    FrameMatchResult result;
    for (const Candidate& c : candidates) {
        if (pred_used[c.pred] || gt_used[c.gt]) {
            continue;
        }
        pred_used[c.pred] = true;
        gt_used[c.gt] = true;
        result.matches.push_back({preds[c.pred].track_id, gts[c.gt].gt_id, c.distance});
    }
    for (std::size_t p = 0; p < preds.size(); ++p) {
        if (!pred_used[p]) {
            result.false_positives.push_back(preds[p].track_id);
        }
    }
    for (std::size_t g = 0; g < gts.size(); ++g) {
        if (!gt_used[g]) {
            result.misses.push_back(gts[g].gt_id);
        }
    }
    if (history != nullptr) {
        for (const MatchPair& m : result.matches) {
            auto [it, inserted] = history->try_emplace(m.gt_id, m.pred_id);
            if (!inserted && it->second != m.pred_id) {
                result.id_switches.push_back(m.gt_id);
                it->second = m.pred_id;
            }
        }
    }
    return result;
}

void MotCounts::merge(const MotCounts& o) {
    frames += o.frames;
    gt += o.gt;
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    ids += o.ids;
    distance_sum += o.distance_sum;
    trajectories += o.trajectories;
    mostly_tracked += o.mostly_tracked;
    mostly_lost += o.mostly_lost;
}

MotCounts accumulate(std::span<const FrameMatchResult> frames) {
    MotCounts c;
    // gt id → (frames alive, frames matched); ordered so the sum is reproducible
    std::map<std::int64_t, std::pair<std::size_t, std::size_t>> life;
    for (const FrameMatchResult& f : frames) {
        ++c.frames;
        c.tp += f.matches.size();
        c.fp += f.false_positives.size();
        c.fn += f.misses.size();
        c.ids += f.id_switches.size();
        for (const MatchPair& m : f.matches) {
            c.distance_sum += m.distance;
            auto& [alive, tracked] = life[m.gt_id];
            ++alive;
            ++tracked;
        }
        for (std::int64_t g : f.misses) {
            ++life[g].first;
        }
    }
    c.gt = c.tp + c.fn;
    c.trajectories = life.size();
    for (const auto& [id, counts] : life) {
        const double ratio = static_cast<double>(counts.second) / static_cast<double>(counts.first);
        if (ratio >= kMostlyTracked) {
            ++c.mostly_tracked;
        } else if (ratio <= kMostlyLost) {
            ++c.mostly_lost;
        }
    }
    return c;
}

MotCounts evaluate_sequence(const Sequence& sequence, double threshold_m, double min_score) {
    MatchHistory history;
    std::vector<FrameMatchResult> results;
    results.reserve(sequence.size());
    std::vector<PredBox> kept;
    for (const FrameData& frame : sequence) {
        kept.clear();
        for (const PredBox& p : frame.preds) {
            if (p.score >= min_score) {
                kept.push_back(p);
            }
        }
        results.push_back(match_frame(kept, frame.gts, threshold_m, &history));
    }
    return accumulate(results);
}

double recall(const MotCounts& c) {
    return c.gt == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.gt);
}

double mota(const MotCounts& c) {
    if (c.gt == 0) {
        return 0.0;
    }
    return 1.0 - static_cast<double>(c.fn + c.fp + c.ids) / static_cast<double>(c.gt);
}

double motp(const MotCounts& c, double threshold_m) {
    return c.tp == 0 ? threshold_m : c.distance_sum / static_cast<double>(c.tp);
}

double faf(const MotCounts& c, double normalization) {
    return c.frames == 0 ? 0.0
                         : static_cast<double>(c.fp) / static_cast<double>(c.frames) * normalization;
}

double motar(const MotCounts& c, double r) {
    if (c.gt == 0 || !(r > 0.0)) {
        return 0.0;
    }
    const double p = static_cast<double>(c.gt);
    const double errors = static_cast<double>(c.ids + c.fp + c.fn);
    const double value = 1.0 - (errors - (1.0 - r) * p) / (r * p);
    return std::clamp(value, 0.0, 1.0);
}

namespace {

std::vector<Sequence> filter_class(std::span<const Sequence> sequences, ObjectClass cls) {
    std::vector<Sequence> out;
    out.reserve(sequences.size());
    for (const Sequence& seq : sequences) {
        Sequence filtered;
        filtered.reserve(seq.size());
        for (const FrameData& frame : seq) {
            FrameData f;
            for (const PredBox& p : frame.preds) {
                if (p.cls == cls) {
                    f.preds.push_back(p);
                }
            }
            for (const GtBox& g : frame.gts) {
                if (g.cls == cls) {
                    f.gts.push_back(g);
                }
            }
            filtered.push_back(std::move(f));
        }
        out.push_back(std::move(filtered));
    }
    return out;
}

MotCounts evaluate_all(const std::vector<Sequence>& sequences, double threshold_m,
                       double min_score) {
    MotCounts total;
    for (const Sequence& seq : sequences) {
        total.merge(evaluate_sequence(seq, threshold_m, min_score));
    }
    return total;
}

std::optional<ClassMetrics> class_metrics(const std::vector<Sequence>& sequences,
                                          const AmotaConfig& config) {
    const double thr = config.match_threshold_m;
    std::vector<double> scores;
    std::size_t gt_boxes = 0;
    for (const Sequence& seq : sequences) {
        for (const FrameData& f : seq) {
            gt_boxes += f.gts.size();
            for (const PredBox& p : f.preds) {
                scores.push_back(p.score);
            }
        }
    }
    if (gt_boxes == 0) {
        return std::nullopt;
    }
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

    // counts at the threshold scores[i], memoized across recall points
    std::map<std::size_t, MotCounts> cache;
    auto at = [&](std::size_t i) -> const MotCounts& {
        auto it = cache.find(i);
        if (it == cache.end()) {
            it = cache.emplace(i, evaluate_all(sequences, thr, scores[i])).first;
        }
        return it->second;
    };

    const std::size_t points = config.n_points - 1;
    ClassMetrics m;
    m.motar_curve.assign(points, 0.0);
    double motp_sum = 0.0;
    std::optional<std::pair<MotCounts, double>> best;  // counts and recall target
    for (std::size_t k = 1; k <= points; ++k) {
        const double r = static_cast<double>(k) / static_cast<double>(points);
        if (scores.empty() || recall(at(0)) < r) {
            motp_sum += thr;
            continue;
        }
        // largest i with recall(scores[i]) >= r; recall is taken as
        // non-increasing in the threshold
        std::size_t lo = 0;
        std::size_t hi = scores.size() - 1;
        while (lo < hi) {
            const std::size_t mid = lo + (hi - lo + 1) / 2;
            if (recall(at(mid)) >= r) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        const MotCounts& c = at(lo);
        m.motar_curve[k - 1] = motar(c, r);
        motp_sum += motp(c, thr);
        if (!best || mota(c) > mota(best->first)) {
            best = std::make_pair(c, r);
        }
    }
    m.amota = std::accumulate(m.motar_curve.begin(), m.motar_curve.end(), 0.0) /
              static_cast<double>(points);
    m.amotp = motp_sum / static_cast<double>(points);

    const MotCounts chosen =
        best ? best->first : evaluate_all(sequences, thr, -std::numeric_limits<double>::infinity());
    m.recall = recall(chosen);
    m.motar = best ? motar(chosen, best->second) : 0.0;
    m.gt = chosen.gt;
    m.mota = mota(chosen);
    m.motp = motp(chosen, thr);
    m.mt = chosen.mostly_tracked;
    m.ml = chosen.mostly_lost;
    m.faf = faf(chosen, config.faf_normalization);
    m.ids = chosen.ids;
    return m;
}

}  // namespace

MetricsReport compute_amota(std::span<const Sequence> sequences, const AmotaConfig& config) {
    if (config.n_points < 2) {
        throw ConfigError("n_points: must be at least 2");
    }
    if (!(config.match_threshold_m > 0.0)) {
        throw ConfigError("match_threshold_m: must be positive");
    }
    MetricsReport report;
    report.n_points = config.n_points;
    report.match_threshold_m = config.match_threshold_m;
    parallel_for(sim::kNumClasses, config.jobs, [&](std::size_t i) {
        report.classes[i] = class_metrics(filter_class(sequences, sim::kAllClasses[i]), config);
    });

    ClassMetrics& o = report.overall;
    o.motar_curve.assign(config.n_points - 1, 0.0);
    std::size_t present = 0;
    for (const auto& c : report.classes) {
        if (!c) {
            continue;
        }
        ++present;
        o.amota += c->amota;
        o.amotp += c->amotp;
        o.recall += c->recall;
        o.motar += c->motar;
        o.mota += c->mota;
        o.motp += c->motp;
        o.faf += c->faf;
        o.gt += c->gt;
        o.mt += c->mt;
        o.ml += c->ml;
        o.ids += c->ids;
        for (std::size_t k = 0; k < o.motar_curve.size(); ++k) {
            o.motar_curve[k] += c->motar_curve[k];
        }
    }
    if (present > 0) {
        const double n = static_cast<double>(present);
        for (double* v : {&o.amota, &o.amotp, &o.recall, &o.motar, &o.mota, &o.motp, &o.faf}) {
            *v /= n;
        }
        for (double& v : o.motar_curve) {
            v /= n;
        }
    }
    return report;
}

Sequence make_sequence(const sim::Scenario& scenario, const pipeline::TrackerOutput& output) {
    if (scenario.frames.size() != output.size()) {
        throw DataError("tracks cover " + std::to_string(output.size()) +
                        " frames but the scenario has " + std::to_string(scenario.frames.size()));
    }
    Sequence seq;
    seq.reserve(output.size());
    for (std::size_t i = 0; i < output.size(); ++i) {
        if (output[i].frame_index != scenario.frames[i].index) {
            throw DataError("tracks frame " + std::to_string(output[i].frame_index) +
                            " does not line up with scenario frame " +
                            std::to_string(scenario.frames[i].index));
        }
        FrameData f;
        for (const auto& t : output[i].tracks) {
            f.preds.push_back({t.track_id, t.cls, t.position, t.score});
        }
        for (const auto& g : sim::gt_in_ego(scenario.frames[i])) {
            f.gts.push_back({g.gt_id, g.cls, g.position});
        }
        seq.push_back(std::move(f));
    }
    return seq;
}

Sequence oracle_sequence(const sim::Scenario& scenario) {
    Sequence seq;
    seq.reserve(scenario.frames.size());
    for (const auto& frame : scenario.frames) {
        FrameData f;
        for (const auto& g : sim::gt_in_ego(frame)) {
            f.preds.push_back({g.gt_id, g.cls, g.position, 1.0});
            f.gts.push_back({g.gt_id, g.cls, g.position});
        }
        seq.push_back(std::move(f));
    }
    return seq;
}

namespace {

json class_to_json(const ClassMetrics& c) {
    return {{"AMOTA", c.amota}, {"AMOTP", c.amotp}, {"Recall", c.recall}, {"MOTAR", c.motar},
            {"GT", c.gt},       {"MOTA", c.mota},   {"MOTP", c.motp},     {"MT", c.mt},
            {"ML", c.ml},       {"FAF", c.faf},     {"IDS", c.ids},       {"MOTAR_curve", c.motar_curve}};
}

ClassMetrics class_from_json(const json& j) {
    ClassMetrics c;
    c.amota = j.at("AMOTA").get<double>();
    c.amotp = j.at("AMOTP").get<double>();
    c.recall = j.at("Recall").get<double>();
    c.motar = j.at("MOTAR").get<double>();
    c.gt = j.at("GT").get<std::size_t>();
    c.mota = j.at("MOTA").get<double>();
    c.motp = j.at("MOTP").get<double>();
    c.mt = j.at("MT").get<std::size_t>();
    c.ml = j.at("ML").get<std::size_t>();
    c.faf = j.at("FAF").get<double>();
    c.ids = j.at("IDS").get<std::size_t>();
    c.motar_curve = j.at("MOTAR_curve").get<std::vector<double>>();
    return c;
}

}  // namespace

json report_to_json(const MetricsReport& report) {
    json classes = json::object();
    for (std::size_t i = 0; i < sim::kNumClasses; ++i) {
        const std::string name(sim::class_name(sim::kAllClasses[i]));
        if (report.classes[i]) {
            classes[name] = class_to_json(*report.classes[i]);
        } else {
            classes[name] = {{"absent", true}};
        }
    }
    return {{"n_points", report.n_points},
            {"match_threshold_m", report.match_threshold_m},
            {"classes", std::move(classes)},
            {"overall", class_to_json(report.overall)}};
}

MetricsReport report_from_json(const json& j) {
    try {
        MetricsReport report;
        report.n_points = j.at("n_points").get<std::size_t>();
        report.match_threshold_m = j.at("match_threshold_m").get<double>();
        const json& classes = j.at("classes");
        for (std::size_t i = 0; i < sim::kNumClasses; ++i) {
            const json& c = classes.at(std::string(sim::class_name(sim::kAllClasses[i])));
            if (!c.value("absent", false)) {
                report.classes[i] = class_from_json(c);
            }
        }
        report.overall = class_from_json(j.at("overall"));
        return report;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed metrics report: ") + e.what());
    }
}

void write_report_csv(std::ostream& out, const MetricsReport& report) {
    out << "class,AMOTA,AMOTP,Recall,MOTAR,GT,MOTA,MOTP,MT,ML,FAF,IDS\n";
    auto row = [&out](std::string_view name, const ClassMetrics& c) {
        char buf[256];
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f,%zu,%.6f,%.6f,%zu,%zu,%.6f,%zu\n",
                      c.amota, c.amotp, c.recall, c.motar, c.gt, c.mota, c.motp, c.mt, c.ml, c.faf,
                      c.ids);
        out << name << buf;
    };
    for (std::size_t i = 0; i < sim::kNumClasses; ++i) {
        if (report.classes[i]) {
            row(sim::class_name(sim::kAllClasses[i]), *report.classes[i]);
        }
    }
    row("overall", report.overall);
}

}  // namespace attentrack::metrics

// SPDX-License-Identifier: Apache-2.0
#include "attentrack/pipeline/tracker.hpp"

#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "attentrack/error.hpp"
#include "attentrack/numcore/ops.hpp"

namespace attentrack::pipeline {

using namespace numcore;
using nlohmann::json;

namespace {

Tensor stack_rows(const std::vector<TrackedObject>& tracks, Tensor TrackedObject::*field) {
    std::vector<Tensor> rows;
    rows.reserve(tracks.size());
    for (const auto& t : tracks) {
        rows.push_back(t.*field);
    }
    return concat_rows(rows);
}

Tensor stack_fine(const std::vector<TrackedObject>& tracks) {
    std::vector<Tensor> rows;
    rows.reserve(tracks.size());
    for (const auto& t : tracks) {
        if (!t.qfine) {
            throw ContractError("step: fusion mode needs Q-fine on every track");
        }
        rows.push_back(*t.qfine);
    }
    return concat_rows(rows);
}

Tensor row_of(const Tensor& x, std::size_t r) {
    const std::size_t index[] = {r};
    return select_rows(x, index);
}

}  // namespace

OutputFrame step(const Model& model, TrackerState& state, const sim::Frame& frame, Mode mode,
                 StepTrace* trace) {
    if (mode != model.config.mode) {
        throw ContractError("step: model was built for " + std::string(mode_name(model.config.mode)) +
                            " but asked to run " + std::string(mode_name(mode)));
    }
    if (state.last_timestamp && !(frame.timestamp > *state.last_timestamp)) {
        throw SequencingError("step: frame timestamp " + std::to_string(frame.timestamp) +
                              " does not follow " + std::to_string(*state.last_timestamp));
    }
    NoGradGuard no_grad;
    const bool fusion = mode == Mode::fusion;
    const std::size_t n = state.tracks.size();

    std::vector<sim::Vec2> prev_positions;
    prev_positions.reserve(n);
    for (const auto& t : state.tracks) {
        prev_positions.push_back(t.position);
    }
    Tensor prev_feats;
    PreviousObjects prev;
    if (n > 0) {
        prev.qin = stack_rows(state.tracks, &TrackedObject::qin);
        prev.qfeat = stack_rows(state.tracks, &TrackedObject::qfeat);
        if (fusion) {
            prev.qfine = stack_fine(state.tracks);
        }
        for (const auto& t : state.tracks) {
            prev.headings.push_back(t.heading);
        }
        prev_feats = fusion ? prev.qfine : prev.qfeat;
    }

    const FrameFeatures features = compute_features(model, frame, prev_feats, prev_positions);
    const std::size_t m = frame.detections.size();

    da::AssociationDecision decision;
    if (n == 0) {
        decision.queries.assign(m, std::nullopt);
    } else {
        const da::AssociationMatrix coarse = coarse_association(model, prev, features.qin);
        da::AssociationDecision coarse_decision = da::greedy_match(coarse);
        if (fusion) {
            const da::AssociationMatrix fine = fine_association(model, prev, features.qin);
            da::AssociationDecision fine_decision = da::greedy_match(fine);
            decision = da::fuse_dual_da({coarse, coarse_decision}, {fine, fine_decision});
            if (trace != nullptr) {
                trace->fine = std::move(fine_decision);
            }
        } else {
            decision = coarse_decision;
        }
        if (trace != nullptr) {
            trace->coarse = std::move(coarse_decision);
        }
    }
    if (trace != nullptr) {
        trace->final_decision = decision;
    }

    auto refresh = [&](TrackedObject& track, std::size_t j) {
        const sim::DetectionQuery& det = frame.detections[j];
        track.cls = det.predicted_class();
        track.position = det.position;
        track.heading = det.heading_meas;
        track.score = det.heatmap_score;
        track.qin = row_of(features.qin, j);
        track.qfeat = row_of(features.qfeat, j);
        if (fusion) {
            track.qfine = row_of(features.qfine, j);
        }
    };

    std::vector<TrackedObject> next;
    next.reserve(n + m);
    for (std::size_t t = 0; t < n; ++t) {
        if (const auto* match = std::get_if<da::Matched>(&decision.tracks[t])) {
            TrackedObject track = std::move(state.tracks[t]);
            refresh(track, match->query);
            ++track.age;
            next.push_back(std::move(track));
        }
    }
    for (std::size_t j = 0; j < m; ++j) {
        if (decision.queries[j].has_value() ||
            frame.detections[j].heatmap_score < model.config.spawn_threshold) {
            continue;
        }
        TrackedObject track;
        track.track_id = state.next_track_id++;
        track.age = 1;
        track.born_at = state.frames_seen;
        refresh(track, j);
        next.push_back(std::move(track));
    }
    state.tracks = std::move(next);
    state.last_timestamp = frame.timestamp;
    ++state.frames_seen;

    OutputFrame out;
    out.frame_index = frame.index;
    out.timestamp = frame.timestamp;
    for (const auto& t : state.tracks) {
        out.tracks.push_back({t.track_id, t.cls, t.position, t.heading, t.score});
    }
    return out;
}

TrackerOutput run_sequence(const sim::Scenario& scenario, const Model& model, Mode mode) {
    TrackerState state;
    TrackerOutput output;
    output.reserve(scenario.frames.size());
    for (const auto& frame : scenario.frames) {
        output.push_back(step(model, state, frame, mode));
    }
    return output;
}

void write_tracks(std::ostream& out, const TrackerOutput& output, std::uint64_t scenario_seed,
                  Mode mode) {
    const json header = {{"schema", kTracksSchema},
                         {"version", kTracksSchemaVersion},
                         {"scenario_seed", scenario_seed},
                         {"mode", mode_name(mode)},
                         {"num_frames", output.size()}};
    out << header.dump() << '\n';
    for (const auto& frame : output) {
        json tracks = json::array();
        for (const auto& t : frame.tracks) {
            tracks.push_back({{"track_id", t.track_id},
                              {"class", sim::class_name(t.cls)},
                              {"x", t.position.x},
                              {"y", t.position.y},
                              {"heading", t.heading},
                              {"score", t.score}});
        }
        out << json{{"frame", frame.frame_index},
                    {"timestamp", frame.timestamp},
                    {"tracks", std::move(tracks)}}
                   .dump()
            << '\n';
    }
}

LoadedTracks read_tracks(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("tracks file is empty");
    }
    LoadedTracks loaded;
    std::size_t expected = 0;
    try {
        const json header = json::parse(line);
        if (!header.is_object() || header.value("schema", "") != kTracksSchema) {
            throw DataError("not a tracks file (schema field missing or different)");
        }
        if (header.value("version", -1) != kTracksSchemaVersion) {
            throw DataError("tracks schema version " + header.value("version", json(-1)).dump() +
                            " is not supported (expected " + std::to_string(kTracksSchemaVersion) +
                            ")");
        }
        loaded.scenario_seed = header.at("scenario_seed").get<std::uint64_t>();
        loaded.mode = parse_mode(header.at("mode").get<std::string>());
        expected = header.at("num_frames").get<std::size_t>();
        while (std::getline(in, line)) {
            if (line.empty()) {
                continue;
            }
            const json j = json::parse(line);
            OutputFrame frame;
            frame.frame_index = j.at("frame").get<std::size_t>();
            frame.timestamp = j.at("timestamp").get<double>();
            for (const auto& t : j.at("tracks")) {
                frame.tracks.push_back({t.at("track_id").get<std::int64_t>(),
                                        sim::parse_class(t.at("class").get<std::string>()),
                                        {t.at("x").get<double>(), t.at("y").get<double>()},
                                        t.at("heading").get<double>(),
                                        t.at("score").get<double>()});
            }
            loaded.output.push_back(std::move(frame));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed tracks file: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("malformed tracks file: ") + e.what());
    }
    if (loaded.output.size() != expected) {
        throw DataError("tracks file declares " + std::to_string(expected) + " frames but has " +
                        std::to_string(loaded.output.size()));
    }
    return loaded;
}

}  // namespace attentrack::pipeline

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "attentrack/da/association.hpp"
#include "attentrack/pipeline/model.hpp"
#include "attentrack/sim/world.hpp"

namespace attentrack::pipeline {

struct TrackedObject {
    std::int64_t track_id = 0;
    sim::ObjectClass cls = sim::ObjectClass::car;
    sim::Vec2 position;
    double heading = 0.0;
    double score = 0.0;
    Tensor qin;    // 1×d, from the last matched detection
    Tensor qfeat;  // 1×d
    std::optional<Tensor> qfine;
    std::size_t age = 1;  // frames this track has existed
    std::size_t born_at = 0;
};

struct TrackReport {
    std::int64_t track_id = 0;
    sim::ObjectClass cls = sim::ObjectClass::car;
    sim::Vec2 position;
    double heading = 0.0;
    double score = 0.0;
    friend bool operator==(const TrackReport&, const TrackReport&) = default;
};

struct OutputFrame {
    std::size_t frame_index = 0;
    double timestamp = 0.0;
    std::vector<TrackReport> tracks;
    friend bool operator==(const OutputFrame&, const OutputFrame&) = default;
};

using TrackerOutput = std::vector<OutputFrame>;

struct TrackerState {
    std::vector<TrackedObject> tracks;
    std::int64_t next_track_id = 0;
    std::optional<double> last_timestamp;
    std::size_t frames_seen = 0;
};

/// Association internals of one step, for inspection and tests.
struct StepTrace {
    std::optional<da::AssociationDecision> coarse;
    std::optional<da::AssociationDecision> fine;
    std::optional<da::AssociationDecision> final_decision;
};

/// Advances the tracker by one frame: features, association against the
/// current tracks, and lifecycle update (matched tracks continue, dead tracks
/// are dropped at once, unclaimed detections above the spawn threshold start
/// new tracks). Throws SequencingError when timestamps do not increase.
OutputFrame step(const Model& model, TrackerState& state, const sim::Frame& frame, Mode mode,
                 StepTrace* trace = nullptr);

/// Folds step over the scenario's frames from a fresh state.
TrackerOutput run_sequence(const sim::Scenario& scenario, const Model& model, Mode mode);

inline constexpr const char* kTracksSchema = "attentrack.tracks";
inline constexpr int kTracksSchemaVersion = 1;

/// JSON-lines: schema header, then one output frame per line.
void write_tracks(std::ostream& out, const TrackerOutput& output, std::uint64_t scenario_seed,
                  Mode mode);
struct LoadedTracks {
    TrackerOutput output;
    std::uint64_t scenario_seed = 0;
    Mode mode = Mode::lidar_only;
};
/// Throws DataError on a malformed file or schema/version mismatch.
LoadedTracks read_tracks(std::istream& in);

}  // namespace attentrack::pipeline

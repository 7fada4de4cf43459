// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "attentrack/numcore/optim.hpp"
#include "attentrack/pipeline/model.hpp"
#include "attentrack/rng.hpp"
#include "attentrack/sim/world.hpp"

namespace attentrack::train {

using pipeline::Model;

/// encoder: detection regression through encoder, QEM and feature layers.
/// da_frozen: association loss, only the DA heads move.
/// joint: association + detection loss, everything but the encoder moves.
enum class Stage : std::uint8_t { encoder, da_frozen, joint };

std::string_view stage_name(Stage stage);
/// Throws ConfigError on an unknown name.
Stage parse_stage(std::string_view name);
/// Parameter groups a stage updates, restricted to the model's active groups.
std::vector<std::string> trainable_groups(Stage stage, const pipeline::ModelConfig& config);

struct TrainConfig {
    Stage stage = Stage::encoder;
    std::size_t epochs = 1;
    std::size_t steps_per_epoch = 5000;
    std::uint64_t seed = 0;
    numcore::AdamWConfig optim;
    double det_loss_weight = 1.0;
    /// Random previous-detection drop and an injected false positive per pair.
    bool augment = false;
    /// Permute labels among rows (no-signal baseline).
    bool shuffle_labels = false;
    /// Frames run before each pair so that the previous frame's features have
    /// been through QEM the way a running tracker's are.
    std::size_t context_frames = 3;

    std::size_t total_steps() const noexcept { return epochs * steps_per_epoch; }
};

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& path = "train");

struct TrainingPair {
    std::vector<sim::Frame> context;  // frames before `prev`, oldest first
    sim::Frame prev;
    sim::Frame curr;
    std::vector<std::size_t> labels;  // per prev detection: curr column or M (dead)
};

/// Uniform scenario, then a uniform consecutive frame pair with up to
/// `context` preceding frames. Throws ConfigError for an empty pool or a pool
/// without a scenario of two or more frames.
TrainingPair sample_pair(std::span<const sim::Scenario> pool, Rng& rng, std::size_t context = 0);

/// Every consecutive frame pair of every scenario, in pool order.
std::vector<TrainingPair> all_pairs(std::span<const sim::Scenario> pool, std::size_t context = 0);

struct PairFeatures {
    pipeline::FrameFeatures prev;
    pipeline::FrameFeatures curr;
};
/// Features of the pair's two frames, QEM chained through the context frames
/// with every detection of a frame standing in for the tracks.
PairFeatures pair_features(const Model& model, const TrainingPair& pair);

struct PairLosses {
    numcore::Tensor association;  // empty when the previous frame has no detections
    numcore::Tensor detection;    // empty when the current frame has no real detections
};

/// Association loss of both heads (fusion sums them) and the current frame's
/// detection loss.
PairLosses pair_losses(const Model& model, const TrainingPair& pair);

struct LossRecord {
    std::size_t step = 0;
    double loss = 0.0;
    double association = 0.0;
    double detection = 0.0;
    double lr = 0.0;
};

struct StageProgress {
    Stage stage = Stage::encoder;
    std::size_t steps_done = 0;
    numcore::OptimizerState optimizer;
};

struct StageResult {
    std::vector<LossRecord> curve;
    StageProgress progress;
    bool finished() const noexcept;
    std::size_t total_steps = 0;
};

/// Runs (or resumes) one training stage with batch size one pair per step.
/// Step k draws its pair from Rng(derive_seed(seed, k)), so a resumed run
/// continues exactly where an uninterrupted one would be. Parameters outside
/// the stage's groups are frozen for the duration and left bit-for-bit
/// unchanged. `stop_after` ends the call early after that many total steps.
StageResult train_stage(Model& model, const TrainConfig& config, std::span<const sim::Scenario> pool,
                        const StageProgress* resume = nullptr,
                        std::optional<std::size_t> stop_after = std::nullopt);

void write_loss_csv(std::ostream& out, std::span<const LossRecord> curve);

struct AssociationEval {
    double mean_loss = 0.0;
    double accuracy = 0.0;  // per-row argmax equals the label
    std::size_t rows = 0;
    std::size_t pairs = 0;
};
/// Coarse association head over every consecutive pair of the pool.
AssociationEval evaluate_association(const Model& model, std::span<const TrainingPair> pairs);

/// Mean detection regression error (MSE) over the current frames of `pairs`.
double detection_error(const Model& model, std::span<const TrainingPair> pairs);

inline constexpr const char* kCheckpointSchema = "attentrack.checkpoint";
inline constexpr int kCheckpointSchemaVersion = 1;

struct Checkpoint {
    Model model;
    std::vector<Stage> completed_stages;
    /// Present when the last stage stopped before its final step.
    std::optional<StageProgress> in_progress;
    std::optional<TrainConfig> config;
};

nlohmann::json checkpoint_to_json(const Checkpoint& checkpoint);
/// Throws DataError on schema/version mismatch or parameter shape mismatch.
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace attentrack::train

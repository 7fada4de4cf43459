// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "attentrack/da/association.hpp"
#include "attentrack/nn/attention.hpp"
#include "attentrack/numcore/optim.hpp"
#include "attentrack/sim/world.hpp"

namespace attentrack::pipeline {

using numcore::NamedParameter;
using numcore::Tensor;

enum class Mode : std::uint8_t { lidar_only, fusion };

std::string_view mode_name(Mode mode);
/// Throws ConfigError on an unknown name.
Mode parse_mode(std::string_view name);

struct ModelConfig {
    std::size_t width = 64;
    std::size_t hidden = 128;
    /// Heads trained and run: lidar_only uses the coarse stream only, fusion
    /// adds the fine feature layer and the extra association head.
    Mode mode = Mode::lidar_only;
    /// Ablation switches.
    bool use_qem = true;
    bool da_transformer = true;
    double r_gate_m = 2.0;
    double spawn_threshold = 0.3;
    std::uint64_t init_seed = 0;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& path = "model");

/// Regression targets per real detection: x, y, length, width, class one-hot,
/// sin, cos of the ground-truth state (same scaling as the raw features).
inline constexpr std::size_t kDetTargetWidth = 13;

/// Every learned block of the tracker. Parameter names are stable and group
/// by prefix: encoder, det_head, qem, coarse, fine, da, extra_da.
struct Model {
    ModelConfig config;
    nn::Mlp2 encoder;   // raw detection features → Q-in
    nn::Mlp2 det_head;  // Q-feat → detection regression targets
    nn::CrossAttentionLayer qem;
    nn::CrossAttentionLayer coarse;  // self-attention standing in for the coarse decoder
    nn::CrossAttentionLayer fine;    // second layer producing Q-fine
    da::DaModule da;
    da::DaModule extra_da;

    static Model create(const ModelConfig& config);

    std::vector<NamedParameter> parameters() const;
    /// Deep copy with independent parameter storage.
    Model clone() const;
};

/// Names of the parameter groups that take part in the forward pass for the
/// model's mode and ablation switches.
std::vector<std::string> active_groups(const ModelConfig& config);
std::string_view group_of(std::string_view parameter_name);

/// Per-frame feature streams.
struct FrameFeatures {
    Tensor qin;
    Tensor enhanced;
    Tensor qfeat;
    Tensor qfine;  // empty outside fusion mode
    std::vector<bool> newborn_mask;
};

/// True where the detection is farther than r_gate from every previous object
/// center (no support from the previous frame).
std::vector<bool> gate_qem(std::span<const sim::Vec2> detections,
                           std::span<const sim::Vec2> previous, double r_gate);

/// encode → gated QEM → coarse (→ fine) layers for one frame. `prev_feats`
/// and `prev_positions` describe the previous frame's objects and may be empty.
FrameFeatures compute_features(const Model& model, const sim::Frame& frame, const Tensor& prev_feats,
                               std::span<const sim::Vec2> prev_positions);

/// Previous-frame object streams feeding the association heads.
struct PreviousObjects {
    Tensor qin;
    Tensor qfeat;
    Tensor qfine;
    std::vector<double> headings;

    std::size_t size() const noexcept { return qin.rows(); }
};

/// Coarse association scores (N×(M+1)). With da_transformer off the raw
/// prev Q-feat is dotted with [curr Q-in; 0].
da::AssociationMatrix coarse_association(const Model& model, const PreviousObjects& prev,
                                         const Tensor& curr_qin);
/// Extra (fine-stream) association scores; fusion mode only.
da::AssociationMatrix fine_association(const Model& model, const PreviousObjects& prev,
                                       const Tensor& curr_qin);

/// Detection regression targets (rows with a ground-truth source only).
struct DetectionTargets {
    std::vector<std::size_t> rows;
    Tensor values;  // rows.size() × kDetTargetWidth
};
DetectionTargets detection_targets(const sim::Frame& frame);

/// Mean squared error of det_head(Q-feat) on the frame's real detections, or
/// an empty tensor when there are none.
Tensor detection_loss(const Model& model, const FrameFeatures& features,
                      const DetectionTargets& targets);

}  // namespace attentrack::pipeline

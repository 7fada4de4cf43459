// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "attentrack/nn/attention.hpp"
#include "attentrack/numcore/tensor.hpp"

namespace attentrack::sim {

using numcore::Tensor;

enum class ObjectClass : std::uint8_t { car, truck, bus, pedestrian, bicycle, motorcycle, trailer };

inline constexpr std::size_t kNumClasses = 7;
inline constexpr std::array<ObjectClass, kNumClasses> kAllClasses = {
    ObjectClass::car,     ObjectClass::truck,      ObjectClass::bus,    ObjectClass::pedestrian,
    ObjectClass::bicycle, ObjectClass::motorcycle, ObjectClass::trailer};

std::string_view class_name(ObjectClass cls);
/// Throws DataError on an unknown name.
ObjectClass parse_class(std::string_view name);
/// Maximum speed in m/s.
double speed_cap(ObjectClass cls);

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

double distance(const Vec2& a, const Vec2& b);

struct Size2 {
    double length = 1.0;
    double width = 1.0;
    friend bool operator==(const Size2&, const Size2&) = default;
};

/// Ego vehicle pose in the world frame.
struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double yaw = 0.0;
    friend bool operator==(const Pose2&, const Pose2&) = default;
};

Vec2 to_ego(const Pose2& ego, const Vec2& world);
Vec2 to_world(const Pose2& ego, const Vec2& local);

/// Ground-truth object; position and heading are in the world frame.
struct ObjectState {
    std::int64_t gt_id = 0;
    ObjectClass cls = ObjectClass::car;
    Vec2 position;
    double heading = 0.0;
    double speed = 0.0;
    Size2 size;
    friend bool operator==(const ObjectState&, const ObjectState&) = default;
};

/// One detector candidate, expressed in the ego frame of its frame.
struct DetectionQuery {
    Vec2 position;
    double heatmap_score = 0.0;
    std::array<double, kNumClasses> class_logits{};
    double heading_meas = 0.0;
    Size2 size_meas;
    /// Ground-truth identity; hidden from the tracker and used only for
    /// labels and metrics. nullopt marks clutter.
    std::optional<std::int64_t> source_gt;

    ObjectClass predicted_class() const;
    friend bool operator==(const DetectionQuery&, const DetectionQuery&) = default;
};

struct Frame {
    std::size_t index = 0;
    double timestamp = 0.0;
    Pose2 ego_pose;
    std::vector<ObjectState> gt_objects;
    std::vector<DetectionQuery> detections;
    friend bool operator==(const Frame&, const Frame&) = default;
};

struct BetaParams {
    double a = 1.0;
    double b = 1.0;
    friend bool operator==(const BetaParams&, const BetaParams&) = default;
};

struct ScenarioConfig {
    std::size_t num_frames = 40;
    double period_s = 0.5;
    double half_extent_m = 40.0;
    std::size_t initial_objects = 8;
    std::size_t max_objects = 10;
    double birth_rate = 0.2;   // expected births per frame
    double death_prob = 0.01;  // per object per frame, besides leaving the box
    double speed_fraction_max = 0.6;
    double accel_noise = 0.5;     // m/s² standard deviation
    double yaw_rate_noise = 0.1;  // rad/s standard deviation
    double ego_speed = 0.0;
    double ego_yaw_rate = 0.0;
    double p_miss = 0.1;
    double clutter_rate = 0.5;  // expected false positives per frame
    double sigma_pos_m = 0.3;
    double sigma_heading_rad = 0.1;
    double sigma_size_m = 0.1;
    double class_logit_noise = 0.5;
    BetaParams true_score{8.0, 2.0};
    BetaParams clutter_score{2.0, 8.0};
    std::array<double, kNumClasses> class_weights{};

    ScenarioConfig();

    /// The standard noisy benchmark (the defaults).
    static ScenarioConfig standard();
    /// No measurement noise, no misses, no clutter.
    static ScenarioConfig noise_free();

    /// Throws ConfigError naming the first offending field.
    void validate() const;
    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct Scenario {
    std::vector<Frame> frames;
    ScenarioConfig config;
    std::uint64_t seed = 0;
    friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Pure function of (config, seed).
Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t seed);

/// Ground-truth objects of a frame with positions and headings moved into the
/// ego frame (the frame detections and tracks live in).
std::vector<ObjectState> gt_in_ego(const Frame& frame);

/// position/40, size/5, class one-hot, heading sin/cos, heatmap score, then a
/// sinusoidal encoding of the position: sin/cos(π·f·x/40) and likewise for y,
/// for each f in kPositionFrequencies.
inline constexpr std::array<double, 4> kPositionFrequencies = {1.0, 2.0, 4.0, 8.0};
inline constexpr std::size_t kRawFeatureWidth = 14 + 4 * kPositionFrequencies.size();
inline constexpr double kPositionScale = 40.0;
inline constexpr double kSizeScale = 5.0;

/// M×kRawFeatureWidth raw detection features.
Tensor raw_features(const Frame& frame);

/// M×d query inputs (Q-in) from the toy observation encoder.
Tensor encode_observations(const Frame& frame, const nn::Mlp2& encoder);

/// For each previous detection, the current detection column showing the same
/// object, or curr.detections.size() (the dead column) when there is none.
std::vector<std::size_t> label_associations(const Frame& prev, const Frame& curr);

}  // namespace attentrack::sim

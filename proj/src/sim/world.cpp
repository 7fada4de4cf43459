// SPDX-License-Identifier: Apache-2.0
#include "attentrack/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "attentrack/error.hpp"
#include "attentrack/rng.hpp"

namespace attentrack::sim {

namespace {

struct ClassInfo {
    std::string_view name;
    double speed_cap;
    Size2 mean_size;
};

// Speed caps in m/s, typical footprints in meters.
constexpr std::array<ClassInfo, kNumClasses> kClassInfo = {{
    {"car", 20.0, {4.6, 1.9}},
    {"truck", 15.0, {6.9, 2.5}},
    {"bus", 15.0, {11.0, 2.9}},
    {"pedestrian", 2.5, {0.7, 0.7}},
    {"bicycle", 8.0, {1.8, 0.6}},
    {"motorcycle", 15.0, {2.1, 0.8}},
    {"trailer", 12.0, {12.0, 2.9}},
}};

const ClassInfo& info(ObjectClass cls) {
    return kClassInfo[static_cast<std::size_t>(cls)];
}

double wrap_angle(double a) {
    return std::remainder(a, 2.0 * std::numbers::pi);
}

ObjectClass sample_class(const std::array<double, kNumClasses>& weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights) {
        total += w;
    }
    double u = rng.uniform() * total;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (u < weights[c]) {
            return kAllClasses[c];
        }
        u -= weights[c];
    }
    return kAllClasses.back();
}

bool inside_box(const Vec2& p, double half_extent) {
    return std::abs(p.x) <= half_extent && std::abs(p.y) <= half_extent;
}

std::array<double, kNumClasses> noisy_logits(ObjectClass cls, double noise, Rng& rng) {
    std::array<double, kNumClasses> logits{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        logits[c] = (kAllClasses[c] == cls ? 3.0 : 0.0) + noise * rng.normal();
    }
    return logits;
}

class World {
public:
    World(const ScenarioConfig& config, std::uint64_t seed)
        : config_(config), rng_(seed), det_rng_(derive_seed(seed, 0xD37EC7)) {}

    Scenario run(std::uint64_t seed) {
        Scenario scenario;
        scenario.config = config_;
        scenario.seed = seed;
        for (std::size_t i = 0; i < config_.initial_objects && objects_.size() < config_.max_objects;
             ++i) {
            spawn();
        }
        for (std::size_t k = 0; k < config_.num_frames; ++k) {
            if (k > 0) {
                advance();
            }
            scenario.frames.push_back(observe(k));
        }
        return scenario;
    }

private:
    void spawn() {
        ObjectState obj;
        obj.gt_id = next_id_++;
        obj.cls = sample_class(config_.class_weights, rng_);
        const double h = config_.half_extent_m;
        const Vec2 local{rng_.uniform(-h, h), rng_.uniform(-h, h)};
        obj.position = to_world(ego_, local);
        obj.heading = wrap_angle(rng_.uniform(-std::numbers::pi, std::numbers::pi));
        obj.speed = rng_.uniform(0.0, config_.speed_fraction_max * info(obj.cls).speed_cap);
        const Size2 mean = info(obj.cls).mean_size;
        obj.size = {mean.length * rng_.uniform(0.9, 1.1), mean.width * rng_.uniform(0.9, 1.1)};
        objects_.push_back(obj);
    }

    void advance() {
        const double dt = config_.period_s;
        ego_.x += config_.ego_speed * dt * std::cos(ego_.yaw);
        ego_.y += config_.ego_speed * dt * std::sin(ego_.yaw);
        ego_.yaw = wrap_angle(ego_.yaw + config_.ego_yaw_rate * dt);

        std::vector<ObjectState> survivors;
        survivors.reserve(objects_.size());
        for (ObjectState obj : objects_) {
            const double cap = speed_cap(obj.cls);
            obj.speed = std::clamp(obj.speed + config_.accel_noise * dt * rng_.normal(), 0.0, cap);
            obj.heading = wrap_angle(obj.heading + config_.yaw_rate_noise * dt * rng_.normal());
            obj.position.x += obj.speed * dt * std::cos(obj.heading);
            obj.position.y += obj.speed * dt * std::sin(obj.heading);
            const bool killed = rng_.bernoulli(config_.death_prob);
            if (!killed && inside_box(to_ego(ego_, obj.position), config_.half_extent_m)) {
                survivors.push_back(obj);
            }
        }
        objects_ = std::move(survivors);
        const std::size_t births = rng_.poisson(config_.birth_rate);
        for (std::size_t b = 0; b < births && objects_.size() < config_.max_objects; ++b) {
            spawn();
        }
    }

    Frame observe(std::size_t k) {
        Frame frame;
        frame.index = k;
        frame.timestamp = static_cast<double>(k) * config_.period_s;
        frame.ego_pose = ego_;
        frame.gt_objects = objects_;
        for (const ObjectState& obj : objects_) {
            if (det_rng_.bernoulli(config_.p_miss)) {
                continue;
            }
            const Vec2 local = to_ego(ego_, obj.position);
            DetectionQuery det;
            det.position = {local.x + config_.sigma_pos_m * det_rng_.normal(),
                            local.y + config_.sigma_pos_m * det_rng_.normal()};
            det.heading_meas = wrap_angle(obj.heading - ego_.yaw +
                                          config_.sigma_heading_rad * det_rng_.normal());
            det.size_meas = {
                std::max(0.1, obj.size.length + config_.sigma_size_m * det_rng_.normal()),
                std::max(0.1, obj.size.width + config_.sigma_size_m * det_rng_.normal())};
            det.class_logits = noisy_logits(obj.cls, config_.class_logit_noise, det_rng_);
            det.heatmap_score = det_rng_.beta(config_.true_score.a, config_.true_score.b);
            det.source_gt = obj.gt_id;
            frame.detections.push_back(det);
        }
        const std::size_t clutter = det_rng_.poisson(config_.clutter_rate);
        const double h = config_.half_extent_m;
        for (std::size_t c = 0; c < clutter; ++c) {
            const ObjectClass cls = sample_class(config_.class_weights, det_rng_);
            DetectionQuery det;
            det.position = {det_rng_.uniform(-h, h), det_rng_.uniform(-h, h)};
            det.heading_meas = det_rng_.uniform(-std::numbers::pi, std::numbers::pi);
            det.size_meas = info(cls).mean_size;
            det.class_logits = noisy_logits(cls, config_.class_logit_noise, det_rng_);
            det.heatmap_score = det_rng_.beta(config_.clutter_score.a, config_.clutter_score.b);
            frame.detections.push_back(det);
        }
        return frame;
    }

    const ScenarioConfig& config_;
    Rng rng_;      // world dynamics
    Rng det_rng_;  // sensor model, kept separate so noise settings do not perturb motion
    Pose2 ego_;
    std::vector<ObjectState> objects_;
    std::int64_t next_id_ = 0;
};

}  // namespace

std::string_view class_name(ObjectClass cls) {
    return info(cls).name;
}

ObjectClass parse_class(std::string_view name) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (kClassInfo[c].name == name) {
            return kAllClasses[c];
        }
    }
    throw DataError("unknown object class '" + std::string(name) + "'");
}

double speed_cap(ObjectClass cls) {
    return info(cls).speed_cap;
}

double distance(const Vec2& a, const Vec2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

Vec2 to_ego(const Pose2& ego, const Vec2& world) {
    const double dx = world.x - ego.x;
    const double dy = world.y - ego.y;
    const double c = std::cos(ego.yaw);
    const double s = std::sin(ego.yaw);
    return {c * dx + s * dy, -s * dx + c * dy};
}

Vec2 to_world(const Pose2& ego, const Vec2& local) {
    const double c = std::cos(ego.yaw);
    const double s = std::sin(ego.yaw);
    return {ego.x + c * local.x - s * local.y, ego.y + s * local.x + c * local.y};
}

ObjectClass DetectionQuery::predicted_class() const {
    const auto best = std::max_element(class_logits.begin(), class_logits.end());
    return kAllClasses[static_cast<std::size_t>(best - class_logits.begin())];
}

ScenarioConfig::ScenarioConfig() {
    // Ground-truth box counts per class in the nuScenes validation split:
    // car, truck, bus, pedestrian, bicycle, motorcycle, trailer.
    class_weights = {58317.0, 9650.0, 2112.0, 25423.0, 1993.0, 1977.0, 2425.0};
}

ScenarioConfig ScenarioConfig::standard() {
    return ScenarioConfig{};
}

ScenarioConfig ScenarioConfig::noise_free() {
    ScenarioConfig config;
    config.p_miss = 0.0;
    config.clutter_rate = 0.0;
    config.sigma_pos_m = 0.0;
    config.sigma_heading_rad = 0.0;
    config.sigma_size_m = 0.0;
    config.class_logit_noise = 0.0;
    return config;
}

void ScenarioConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("scenario." + field + ": " + why);
    };
    auto non_negative = [&](const char* field, double v) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            fail(field, "must be a finite value >= 0");
        }
    };
    if (num_frames < 2) {
        fail("num_frames", "must be at least 2");
    }
    if (!(period_s > 0.0)) {
        fail("period_s", "must be positive");
    }
    if (!(half_extent_m > 0.0)) {
        fail("half_extent_m", "must be positive");
    }
    if (max_objects == 0) {
        fail("max_objects", "must be positive");
    }
    non_negative("birth_rate", birth_rate);
    non_negative("clutter_rate", clutter_rate);
    non_negative("accel_noise", accel_noise);
    non_negative("yaw_rate_noise", yaw_rate_noise);
    non_negative("ego_speed", ego_speed);
    non_negative("sigma_pos_m", sigma_pos_m);
    non_negative("sigma_heading_rad", sigma_heading_rad);
    non_negative("sigma_size_m", sigma_size_m);
    non_negative("class_logit_noise", class_logit_noise);
    if (!std::isfinite(ego_yaw_rate)) {
        fail("ego_yaw_rate", "must be finite");
    }
    if (!(death_prob >= 0.0 && death_prob <= 1.0)) {
        fail("death_prob", "must be in [0, 1]");
    }
    if (!(p_miss >= 0.0 && p_miss <= 1.0)) {
        fail("p_miss", "must be in [0, 1]");
    }
    if (!(speed_fraction_max > 0.0 && speed_fraction_max <= 1.0)) {
        fail("speed_fraction_max", "must be in (0, 1]");
    }
    if (!(true_score.a > 0.0 && true_score.b > 0.0)) {
        fail("true_score", "beta parameters must be positive");
    }
    if (!(clutter_score.a > 0.0 && clutter_score.b > 0.0)) {
        fail("clutter_score", "beta parameters must be positive");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (!(class_weights[c] >= 0.0)) {
            fail("class_weights[" + std::to_string(c) + "]", "must be >= 0");
        }
        total += class_weights[c];
    }
    if (!(total > 0.0)) {
        fail("class_weights", "at least one class needs a positive weight");
    }
}

Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t seed) {
    config.validate();
    World world(config, seed);
    return world.run(seed);
}

std::vector<ObjectState> gt_in_ego(const Frame& frame) {
    std::vector<ObjectState> out = frame.gt_objects;
    for (ObjectState& obj : out) {
        obj.position = to_ego(frame.ego_pose, obj.position);
        obj.heading = wrap_angle(obj.heading - frame.ego_pose.yaw);
    }
    return out;
}

Tensor raw_features(const Frame& frame) {
    const std::size_t m = frame.detections.size();
    std::vector<double> values;
    values.reserve(m * kRawFeatureWidth);
    for (const DetectionQuery& det : frame.detections) {
        values.push_back(det.position.x / kPositionScale);
        values.push_back(det.position.y / kPositionScale);
        values.push_back(det.size_meas.length / kSizeScale);
        values.push_back(det.size_meas.width / kSizeScale);
        const ObjectClass cls = det.predicted_class();
        for (ObjectClass c : kAllClasses) {
            values.push_back(c == cls ? 1.0 : 0.0);
        }
        values.push_back(std::sin(det.heading_meas));
        values.push_back(std::cos(det.heading_meas));
        values.push_back(det.heatmap_score);
        for (double f : kPositionFrequencies) {
            for (double coord : {det.position.x, det.position.y}) {
                const double phase = M_PI * f * coord / kPositionScale;
                values.push_back(std::sin(phase));
                values.push_back(std::cos(phase));
            }
        }
    }
    return Tensor::from(m, kRawFeatureWidth, std::move(values));
}

Tensor encode_observations(const Frame& frame, const nn::Mlp2& encoder) {
    if (encoder.in_width() != kRawFeatureWidth) {
        throw DimensionError("encode_observations: encoder expects width " +
                             std::to_string(encoder.in_width()) + ", raw layout has " +
                             std::to_string(kRawFeatureWidth));
    }
    if (frame.detections.empty()) {
        return Tensor::zeros(0, encoder.out_width());
    }
    return nn::mlp2_forward(encoder, raw_features(frame));
}

std::vector<std::size_t> label_associations(const Frame& prev, const Frame& curr) {
    const std::size_t dead = curr.detections.size();
    std::unordered_map<std::int64_t, std::size_t> column_of;
    for (std::size_t j = 0; j < curr.detections.size(); ++j) {
        if (const auto& gt = curr.detections[j].source_gt) {
            column_of.emplace(*gt, j);
        }
    }
    std::vector<std::size_t> labels;
    labels.reserve(prev.detections.size());
    for (const DetectionQuery& det : prev.detections) {
        std::size_t column = dead;
        if (det.source_gt) {
            if (auto it = column_of.find(*det.source_gt); it != column_of.end()) {
                column = it->second;
            }
        }
        labels.push_back(column);
    }
    return labels;
}

}  // namespace attentrack::sim

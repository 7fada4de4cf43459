// SPDX-License-Identifier: Apache-2.0
#include "attentrack/pipeline/model.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

#include "attentrack/error.hpp"
#include "attentrack/json_fields.hpp"
#include "attentrack/numcore/ops.hpp"
#include "attentrack/qem/enhance.hpp"

namespace attentrack::pipeline {

using namespace numcore;

std::string_view mode_name(Mode mode) {
    return mode == Mode::fusion ? "fusion" : "lidar_only";
}

Mode parse_mode(std::string_view name) {
    if (name == "lidar_only") {
        return Mode::lidar_only;
    }
    if (name == "fusion") {
        return Mode::fusion;
    }
    throw ConfigError("mode: expected lidar_only or fusion, got '" + std::string(name) + "'");
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
    return {{"width", c.width},
            {"hidden", c.hidden},
            {"mode", mode_name(c.mode)},
            {"use_qem", c.use_qem},
            {"da_transformer", c.da_transformer},
            {"r_gate_m", c.r_gate_m},
            {"spawn_threshold", c.spawn_threshold},
            {"init_seed", c.init_seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& path) {
    ModelConfig c;
    FieldReader r(j, path);
    r.read("width", c.width);
    r.read("hidden", c.hidden);
    std::string mode(mode_name(c.mode));
    r.read("mode", mode);
    try {
        c.mode = parse_mode(mode);
    } catch (const ConfigError& e) {
        throw ConfigError(path + "." + e.what());
    }
    r.read("use_qem", c.use_qem);
    r.read("da_transformer", c.da_transformer);
    r.read("r_gate_m", c.r_gate_m);
    r.read("spawn_threshold", c.spawn_threshold);
    r.read("init_seed", c.init_seed);
    r.finish();
    if (c.width == 0) {
        throw ConfigError(path + ".width: must be positive");
    }
    if (c.hidden == 0) {
        throw ConfigError(path + ".hidden: must be positive");
    }
    if (!(c.r_gate_m >= 0.0)) {
        throw ConfigError(path + ".r_gate_m: must be >= 0");
    }
    if (!(c.spawn_threshold >= 0.0 && c.spawn_threshold <= 1.0)) {
        throw ConfigError(path + ".spawn_threshold: must be in [0, 1]");
    }
    return c;
}

Model Model::create(const ModelConfig& config) {
    if (config.width == 0 || config.hidden == 0) {
        throw ConfigError("model: width and hidden must be positive");
    }
    Rng rng(config.init_seed);
    Model m;
    m.config = config;
    m.encoder = nn::Mlp2::create(sim::kRawFeatureWidth, config.hidden, config.width, rng);
    m.det_head = nn::Mlp2::create(config.width, config.hidden, kDetTargetWidth, rng);
    m.qem = nn::CrossAttentionLayer::create(config.width, rng);
    m.coarse = nn::CrossAttentionLayer::create(config.width, rng);
    m.fine = nn::CrossAttentionLayer::create(config.width, rng);
    m.da = da::DaModule::create(config.width, config.hidden, rng);
    m.extra_da = da::DaModule::create(config.width, config.hidden, rng);
    return m;
}

std::vector<NamedParameter> Model::parameters() const {
    std::vector<NamedParameter> out;
    encoder.collect("encoder", out);
    det_head.collect("det_head", out);
    qem.collect("qem", out);
    coarse.collect("coarse", out);
    fine.collect("fine", out);
    da.collect("da", out);
    extra_da.collect("extra_da", out);
    return out;
}

namespace {

nn::Mlp2 clone(const nn::Mlp2& m) {
    return {m.w1.clone(), m.b1.clone(), m.w2.clone(), m.b2.clone()};
}

nn::CrossAttentionLayer clone(const nn::CrossAttentionLayer& l) {
    nn::CrossAttentionLayer c = l;
    c.w_q = l.w_q.clone();
    c.w_k = l.w_k.clone();
    c.w_v = l.w_v.clone();
    c.w_out = l.w_out.clone();
    c.ln_gamma = l.ln_gamma.clone();
    c.ln_beta = l.ln_beta.clone();
    return c;
}

da::DaModule clone(const da::DaModule& d) {
    return {{d.heading.weight.clone(), d.heading.bias.clone()},
            clone(d.h_cross),
            clone(d.q_cross),
            clone(d.target_mlp)};
}

}  // namespace

Model Model::clone() const {
    Model m;
    m.config = config;
    m.encoder = pipeline::clone(encoder);
    m.det_head = pipeline::clone(det_head);
    m.qem = pipeline::clone(qem);
    m.coarse = pipeline::clone(coarse);
    m.fine = pipeline::clone(fine);
    m.da = pipeline::clone(da);
    m.extra_da = pipeline::clone(extra_da);
    return m;
}

std::vector<std::string> active_groups(const ModelConfig& config) {
    std::vector<std::string> groups = {"encoder", "det_head", "coarse"};
    if (config.use_qem) {
        groups.push_back("qem");
    }
    if (config.mode == Mode::fusion) {
        groups.push_back("fine");
    }
    if (config.da_transformer) {
        groups.push_back("da");
        if (config.mode == Mode::fusion) {
            groups.push_back("extra_da");
        }
    }
    return groups;
}

std::string_view group_of(std::string_view parameter_name) {
    return parameter_name.substr(0, parameter_name.find('.'));
}

std::vector<bool> gate_qem(std::span<const sim::Vec2> detections,
                           std::span<const sim::Vec2> previous, double r_gate) {
    std::vector<bool> newborn(detections.size(), true);
    for (std::size_t i = 0; i < detections.size(); ++i) {
        for (const sim::Vec2& p : previous) {
            if (sim::distance(detections[i], p) <= r_gate) {
                newborn[i] = false;
                break;
            }
        }
    }
    return newborn;
}

FrameFeatures compute_features(const Model& model, const sim::Frame& frame, const Tensor& prev_feats,
                               std::span<const sim::Vec2> prev_positions) {
    FrameFeatures out;
    out.qin = sim::encode_observations(frame, model.encoder);
    const std::size_t m = out.qin.rows();
    std::vector<sim::Vec2> positions;
    positions.reserve(m);
    for (const auto& det : frame.detections) {
        positions.push_back(det.position);
    }
    if (model.config.use_qem) {
        auto enhanced = qem::enhance_queries(model.qem, out.qin, prev_feats,
                                             gate_qem(positions, prev_positions, model.config.r_gate_m));
        out.enhanced = std::move(enhanced.embeddings);
        out.newborn_mask = std::move(enhanced.newborn_mask);
    } else {
        out.enhanced = out.qin;
        out.newborn_mask.assign(m, true);
    }
    if (m == 0) {
        out.qfeat = out.enhanced;
        out.qfine = model.config.mode == Mode::fusion ? out.enhanced : Tensor();
        return out;
    }
    out.qfeat = nn::cross_attend(model.coarse, out.enhanced, out.enhanced);
    if (model.config.mode == Mode::fusion) {
        out.qfine = nn::cross_attend(model.fine, out.qfeat, out.qfeat);
    }
    return out;
}

namespace {

Tensor with_dead_row(const Tensor& curr_qin, std::size_t width) {
    const Tensor dead = Tensor::zeros(1, width);
    return curr_qin.rows() == 0 ? dead : concat_rows(curr_qin, dead);
}

}  // namespace

da::AssociationMatrix coarse_association(const Model& model, const PreviousObjects& prev,
                                         const Tensor& curr_qin) {
    if (!model.config.da_transformer) {
        return da::associate(prev.qfeat, with_dead_row(curr_qin, model.config.width));
    }
    const Tensor updated = da::update_query_features(model.da, prev.qfeat, prev.qin, prev.headings);
    return da::associate(updated, da::refine_targets(model.da, curr_qin));
}

da::AssociationMatrix fine_association(const Model& model, const PreviousObjects& prev,
                                       const Tensor& curr_qin) {
    if (model.config.mode != Mode::fusion) {
        throw ContractError("fine_association: model is not in fusion mode");
    }
    if (!model.config.da_transformer) {
        return da::associate(prev.qfine, with_dead_row(curr_qin, model.config.width));
    }
    const Tensor updated =
        da::update_query_features(model.extra_da, prev.qfine, prev.qin, prev.headings, prev.qfeat);
    return da::associate(updated, da::refine_targets(model.extra_da, curr_qin));
}

DetectionTargets detection_targets(const sim::Frame& frame) {
    std::unordered_map<std::int64_t, const sim::ObjectState*> by_id;
    const auto gts = sim::gt_in_ego(frame);
    for (const auto& obj : gts) {
        by_id.emplace(obj.gt_id, &obj);
    }
    DetectionTargets targets;
    std::vector<double> values;
    for (std::size_t j = 0; j < frame.detections.size(); ++j) {
        const auto& src = frame.detections[j].source_gt;
        if (!src) {
            continue;
        }
        const auto it = by_id.find(*src);
        if (it == by_id.end()) {
            continue;
        }
        const sim::ObjectState& obj = *it->second;
        targets.rows.push_back(j);
        values.push_back(obj.position.x / sim::kPositionScale);
        values.push_back(obj.position.y / sim::kPositionScale);
        values.push_back(obj.size.length / sim::kSizeScale);
        values.push_back(obj.size.width / sim::kSizeScale);
        for (sim::ObjectClass c : sim::kAllClasses) {
            values.push_back(c == obj.cls ? 1.0 : 0.0);
        }
        values.push_back(std::sin(obj.heading));
        values.push_back(std::cos(obj.heading));
    }
    targets.values = Tensor::from(targets.rows.size(), kDetTargetWidth, std::move(values));
    return targets;
}

Tensor detection_loss(const Model& model, const FrameFeatures& features,
                      const DetectionTargets& targets) {
    if (targets.rows.empty()) {
        return Tensor();
    }
    const Tensor& stream = model.config.mode == Mode::fusion ? features.qfine : features.qfeat;
    const Tensor predicted = nn::mlp2_forward(model.det_head, select_rows(stream, targets.rows));
    return mean(square(sub(predicted, targets.values)));
}

}  // namespace attentrack::pipeline

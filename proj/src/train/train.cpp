// SPDX-License-Identifier: Apache-2.0
#include "attentrack/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include "attentrack/error.hpp"
#include "attentrack/json_fields.hpp"
#include "attentrack/numcore/ops.hpp"

namespace attentrack::train {

using namespace numcore;
using nlohmann::json;

std::string_view stage_name(Stage stage) {
    switch (stage) {
        case Stage::encoder:
            return "encoder";
        case Stage::da_frozen:
            return "da_frozen";
        case Stage::joint:
            return "joint";
    }
    return "encoder";
}

Stage parse_stage(std::string_view name) {
    for (Stage s : {Stage::encoder, Stage::da_frozen, Stage::joint}) {
        if (stage_name(s) == name) {
            return s;
        }
    }
    throw ConfigError("stage: expected encoder, da_frozen or joint, got '" + std::string(name) + "'");
}

std::vector<std::string> trainable_groups(Stage stage, const pipeline::ModelConfig& config) {
    std::vector<std::string> wanted;
    switch (stage) {
        case Stage::encoder:
            wanted = {"encoder", "det_head", "qem", "coarse", "fine"};
            break;
        case Stage::da_frozen:
            wanted = {"da", "extra_da"};
            break;
        case Stage::joint:
            wanted = {"det_head", "qem", "coarse", "fine", "da", "extra_da"};
            break;
    }
    const auto active = pipeline::active_groups(config);
    std::vector<std::string> out;
    for (const auto& g : wanted) {
        if (std::find(active.begin(), active.end(), g) != active.end()) {
            out.push_back(g);
        }
    }
    return out;
}

json train_config_to_json(const TrainConfig& c) {
    return {{"stage", stage_name(c.stage)},
            {"epochs", c.epochs},
            {"steps_per_epoch", c.steps_per_epoch},
            {"seed", c.seed},
            {"optim",
             {{"max_lr", c.optim.max_lr},
              {"weight_decay", c.optim.weight_decay},
              {"beta1_low", c.optim.beta1_low},
              {"beta1_high", c.optim.beta1_high},
              {"beta2", c.optim.beta2},
              {"eps", c.optim.eps},
              {"warmup_fraction", c.optim.warmup_fraction},
              {"div_factor", c.optim.div_factor},
              {"final_div_factor", c.optim.final_div_factor}}},
            {"det_loss_weight", c.det_loss_weight},
            {"augment", c.augment},
            {"shuffle_labels", c.shuffle_labels},
            {"context_frames", c.context_frames}};
}

TrainConfig train_config_from_json(const json& j, const std::string& path) {
    TrainConfig c;
    FieldReader r(j, path);
    std::string stage(stage_name(c.stage));
    r.read("stage", stage);
    try {
        c.stage = parse_stage(stage);
    } catch (const ConfigError& e) {
        throw ConfigError(path + "." + e.what());
    }
    r.read("epochs", c.epochs);
    r.read("steps_per_epoch", c.steps_per_epoch);
    r.read("seed", c.seed);
    if (r.has("optim")) {
        FieldReader o(r.at("optim"), r.child("optim"));
        o.read("max_lr", c.optim.max_lr);
        o.read("weight_decay", c.optim.weight_decay);
        o.read("beta1_low", c.optim.beta1_low);
        o.read("beta1_high", c.optim.beta1_high);
        o.read("beta2", c.optim.beta2);
        o.read("eps", c.optim.eps);
        o.read("warmup_fraction", c.optim.warmup_fraction);
        o.read("div_factor", c.optim.div_factor);
        o.read("final_div_factor", c.optim.final_div_factor);
        o.finish();
        if (!(c.optim.max_lr > 0.0)) {
            throw ConfigError(o.child("max_lr") + ": must be positive");
        }
        if (!(c.optim.weight_decay >= 0.0)) {
            throw ConfigError(o.child("weight_decay") + ": must be >= 0");
        }
        if (!(c.optim.beta1_low > 0.0 && c.optim.beta1_low <= c.optim.beta1_high &&
              c.optim.beta1_high < 1.0)) {
            throw ConfigError(o.child("beta1_low") + ": need 0 < beta1_low <= beta1_high < 1");
        }
        if (!(c.optim.beta2 > 0.0 && c.optim.beta2 < 1.0)) {
            throw ConfigError(o.child("beta2") + ": must be in (0, 1)");
        }
        if (!(c.optim.warmup_fraction > 0.0 && c.optim.warmup_fraction < 1.0)) {
            throw ConfigError(o.child("warmup_fraction") + ": must be in (0, 1)");
        }
    }
    r.read("det_loss_weight", c.det_loss_weight);
    r.read("augment", c.augment);
    r.read("shuffle_labels", c.shuffle_labels);
    r.read("context_frames", c.context_frames);
    r.finish();
    if (c.total_steps() == 0) {
        throw ConfigError(path + ".steps_per_epoch: epochs × steps_per_epoch must be positive");
    }
    if (!(c.det_loss_weight >= 0.0)) {
        throw ConfigError(path + ".det_loss_weight: must be >= 0");
    }
    return c;
}

namespace {

TrainingPair make_pair(const sim::Scenario& s, std::size_t t, std::size_t context) {
    TrainingPair pair;
    pair.context.assign(s.frames.begin() + static_cast<std::ptrdiff_t>(t - std::min(t, context)),
                        s.frames.begin() + static_cast<std::ptrdiff_t>(t));
    pair.prev = s.frames[t];
    pair.curr = s.frames[t + 1];
    pair.labels = sim::label_associations(pair.prev, pair.curr);
    return pair;
}

}  // namespace

TrainingPair sample_pair(std::span<const sim::Scenario> pool, Rng& rng, std::size_t context) {
    if (pool.empty()) {
        throw ConfigError("train: scenario pool is empty");
    }
    const bool usable = std::any_of(pool.begin(), pool.end(),
                                    [](const sim::Scenario& s) { return s.frames.size() >= 2; });
    if (!usable) {
        throw ConfigError("train: no scenario in the pool has two or more frames");
    }
    for (;;) {
        const sim::Scenario& s = pool[rng.below(pool.size())];
        if (s.frames.size() < 2) {
            continue;
        }
        return make_pair(s, rng.below(s.frames.size() - 1), context);
    }
}

std::vector<TrainingPair> all_pairs(std::span<const sim::Scenario> pool, std::size_t context) {
    std::vector<TrainingPair> out;
    for (const auto& s : pool) {
        for (std::size_t t = 0; t + 1 < s.frames.size(); ++t) {
            out.push_back(make_pair(s, t, context));
        }
    }
    return out;
}

namespace {

void augment_pair(TrainingPair& pair, const sim::ScenarioConfig& scenario, Rng& rng) {
    // drop previous detections as a missed-track stand-in, keep at least one
    std::vector<sim::DetectionQuery> kept;
    for (const auto& det : pair.prev.detections) {
        if (!rng.bernoulli(0.1)) {
            kept.push_back(det);
        }
    }
    if (kept.empty() && !pair.prev.detections.empty()) {
        kept.push_back(pair.prev.detections.front());
    }
    pair.prev.detections = std::move(kept);
    if (rng.bernoulli(0.5)) {
        sim::DetectionQuery fp;
        const double e = scenario.half_extent_m;
        fp.position = {rng.uniform(-e, e), rng.uniform(-e, e)};
        fp.heatmap_score = rng.beta(scenario.clutter_score.a, scenario.clutter_score.b);
        for (double& logit : fp.class_logits) {
            logit = rng.normal(0.0, 1.0);
        }
        fp.heading_meas = rng.uniform(-M_PI, M_PI);
        fp.size_meas = {rng.uniform(0.5, 5.0), rng.uniform(0.5, 2.5)};
        pair.curr.detections.push_back(fp);
    }
    pair.labels = sim::label_associations(pair.prev, pair.curr);
}

void shuffle(std::vector<std::size_t>& labels, Rng& rng) {
    for (std::size_t i = labels.size(); i > 1; --i) {
        std::swap(labels[i - 1], labels[rng.below(i)]);
    }
}

/// Restores every parameter's requires_grad flag on scope exit.
class FreezeGuard {
public:
    FreezeGuard(std::vector<NamedParameter> params, const std::vector<std::string>& trainable)
        : params_(std::move(params)) {
        for (auto& p : params_) {
            saved_.push_back(p.tensor.requires_grad());
            const auto group = pipeline::group_of(p.name);
            const bool on = std::find(trainable.begin(), trainable.end(), group) != trainable.end();
            p.tensor.set_requires_grad(on);
            if (on) {
                trainable_.push_back(p);
            }
        }
    }
    ~FreezeGuard() {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            params_[i].tensor.set_requires_grad(saved_[i]);
        }
    }
    FreezeGuard(const FreezeGuard&) = delete;
    FreezeGuard& operator=(const FreezeGuard&) = delete;

    std::vector<NamedParameter>& trainable() { return trainable_; }

private:
    std::vector<NamedParameter> params_;
    std::vector<NamedParameter> trainable_;
    std::vector<bool> saved_;
};

struct StepLoss {
    Tensor total;
    double association = 0.0;
    double detection = 0.0;
};

std::optional<StepLoss> stage_loss(const Model& model, const TrainConfig& config,
                                   const TrainingPair& pair) {
    const PairLosses losses = pair_losses(model, pair);
    StepLoss out;
    if (!losses.association.empty()) {
        out.association = losses.association.item();
    }
    if (!losses.detection.empty()) {
        out.detection = losses.detection.item();
    }
    switch (config.stage) {
        case Stage::encoder:
            if (losses.detection.empty()) {
                return std::nullopt;
            }
            out.total = losses.detection;
            break;
        case Stage::da_frozen:
            if (losses.association.empty()) {
                return std::nullopt;
            }
            out.total = losses.association;
            break;
        case Stage::joint:
            if (!model.config.da_transformer) {
                // no learned association head: the features only see the
                // detection objective
                if (losses.detection.empty()) {
                    return std::nullopt;
                }
                out.total = scale(losses.detection, config.det_loss_weight);
                break;
            }
            if (losses.association.empty()) {
                return std::nullopt;
            }
            out.total = losses.detection.empty()
                            ? losses.association
                            : add(losses.association, scale(losses.detection, config.det_loss_weight));
            break;
    }
    return out;
}

}  // namespace

namespace {

std::vector<sim::Vec2> positions_of(const sim::Frame& frame) {
    std::vector<sim::Vec2> out;
    out.reserve(frame.detections.size());
    for (const auto& det : frame.detections) {
        out.push_back(det.position);
    }
    return out;
}

pipeline::PreviousObjects previous_objects(const pipeline::FrameFeatures& f, const sim::Frame& frame) {
    pipeline::PreviousObjects objects{f.qin, f.qfeat, f.qfine, {}};
    for (const auto& det : frame.detections) {
        objects.headings.push_back(det.heading_meas);
    }
    return objects;
}

}  // namespace

PairFeatures pair_features(const Model& model, const TrainingPair& pair) {
    const bool fusion = model.config.mode == pipeline::Mode::fusion;
    Tensor stream;
    std::vector<sim::Vec2> positions;
    auto advance = [&](const sim::Frame& frame) {
        auto f = pipeline::compute_features(model, frame, stream, positions);
        stream = fusion ? f.qfine : f.qfeat;
        positions = positions_of(frame);
        return f;
    };
    for (const auto& frame : pair.context) {
        advance(frame);
    }
    PairFeatures out;
    out.prev = advance(pair.prev);
    out.curr = advance(pair.curr);
    return out;
}

PairLosses pair_losses(const Model& model, const TrainingPair& pair) {
    const bool fusion = model.config.mode == pipeline::Mode::fusion;
    const PairFeatures features = pair_features(model, pair);
    const auto& curr = features.curr;
    PairLosses out;
    if (!pair.prev.detections.empty()) {
        if (pair.labels.size() != pair.prev.detections.size()) {
            throw ContractError("pair_losses: one label per previous detection expected");
        }
        const auto objects = previous_objects(features.prev, pair.prev);
        out.association =
            da::association_loss(pipeline::coarse_association(model, objects, curr.qin), pair.labels);
        if (fusion) {
            out.association = add(out.association,
                                  da::association_loss(pipeline::fine_association(model, objects, curr.qin),
                                                       pair.labels));
        }
    }
    out.detection = pipeline::detection_loss(model, curr, pipeline::detection_targets(pair.curr));
    return out;
}

bool StageResult::finished() const noexcept {
    return progress.steps_done >= total_steps;
}

StageResult train_stage(Model& model, const TrainConfig& config, std::span<const sim::Scenario> pool,
                        const StageProgress* resume, std::optional<std::size_t> stop_after) {
    const std::size_t total = config.total_steps();
    if (total == 0) {
        throw ConfigError("train.steps_per_epoch: epochs × steps_per_epoch must be positive");
    }
    if (resume != nullptr && resume->stage != config.stage) {
        throw ContractError("train_stage: resuming a " + std::string(stage_name(resume->stage)) +
                            " run as " + std::string(stage_name(config.stage)));
    }
    StageResult result;
    result.total_steps = total;
    result.progress = resume != nullptr ? *resume : StageProgress{config.stage, 0, {}};
    const std::size_t end = stop_after ? std::min(total, *stop_after) : total;

    const auto groups = trainable_groups(config.stage, model.config);
    if (groups.empty()) {
        // nothing to optimize (DA heads switched off); the stage is a no-op
        result.progress.steps_done = total;
        return result;
    }
    FreezeGuard freeze(model.parameters(), groups);
    const sim::ScenarioConfig& world = pool.empty() ? sim::ScenarioConfig{} : pool.front().config;

    for (std::size_t k = result.progress.steps_done; k < end; ++k) {
        Rng rng(derive_seed(config.seed, k));
        std::optional<StepLoss> loss;
        for (int attempt = 0; attempt < 256 && !loss; ++attempt) {
            TrainingPair pair = sample_pair(pool, rng, config.context_frames);
            if (config.augment) {
                augment_pair(pair, world, rng);
            }
            if (config.shuffle_labels) {
                shuffle(pair.labels, rng);
            }
            loss = stage_loss(model, config, pair);
        }
        if (!loss) {
            throw ConfigError("train: the pool yields no pair with a usable " +
                              std::string(stage_name(config.stage)) + " loss");
        }
        for (auto& p : freeze.trainable()) {
            p.tensor.zero_grad();
        }
        backward(loss->total);
        std::vector<NamedParameter> with_grad;
        for (const auto& p : freeze.trainable()) {
            if (p.tensor.has_grad()) {
                with_grad.push_back(p);
            }
        }
        const double position =
            total == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(total - 1);
        adamw_step(with_grad, result.progress.optimizer, position, config.optim);
        for (auto& p : with_grad) {
            p.tensor.zero_grad();
        }
        result.curve.push_back({k, loss->total.item(), loss->association, loss->detection,
                                one_cycle(config.optim, position).lr});
        result.progress.steps_done = k + 1;
    }
    return result;
}

void write_loss_csv(std::ostream& out, std::span<const LossRecord> curve) {
    out << "step,loss,association,detection,lr\n";
    char buf[160];
    for (const auto& r : curve) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", r.step, r.loss, r.association,
                      r.detection, r.lr);
        out << buf;
    }
}

AssociationEval evaluate_association(const Model& model, std::span<const TrainingPair> pairs) {
    NoGradGuard no_grad;
    AssociationEval eval;
    std::size_t correct = 0;
    double loss_sum = 0.0;
    for (const auto& pair : pairs) {
        if (pair.prev.detections.empty()) {
            continue;
        }
        const PairFeatures features = pair_features(model, pair);
        const da::AssociationMatrix matrix = pipeline::coarse_association(
            model, previous_objects(features.prev, pair.prev), features.curr.qin);
        loss_sum += da::association_loss(matrix, pair.labels).item();
        for (std::size_t t = 0; t < matrix.tracks(); ++t) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < matrix.queries() + 1; ++c) {
                if (matrix.score(t, c) > matrix.score(t, best)) {
                    best = c;
                }
            }
            correct += best == pair.labels[t] ? 1 : 0;
        }
        eval.rows += matrix.tracks();
        ++eval.pairs;
    }
    if (eval.pairs > 0) {
        eval.mean_loss = loss_sum / static_cast<double>(eval.pairs);
        eval.accuracy = static_cast<double>(correct) / static_cast<double>(eval.rows);
    }
    return eval;
}

double detection_error(const Model& model, std::span<const TrainingPair> pairs) {
    NoGradGuard no_grad;
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& pair : pairs) {
        const Tensor loss = pipeline::detection_loss(model, pair_features(model, pair).curr,
                                                     pipeline::detection_targets(pair.curr));
        if (!loss.empty()) {
            sum += loss.item();
            ++count;
        }
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

namespace {

json optimizer_to_json(const OptimizerState& s) {
    json moments = json::object();
    for (const auto& [name, m] : s.moments) {
        moments[name] = {{"first", m.first}, {"second", m.second}, {"updates", m.updates}};
    }
    return {{"step", s.step}, {"schedule_position", s.schedule_position}, {"moments", moments}};
}

OptimizerState optimizer_from_json(const json& j) {
    OptimizerState s;
    s.step = j.at("step").get<std::uint64_t>();
    s.schedule_position = j.at("schedule_position").get<double>();
    for (const auto& [name, m] : j.at("moments").items()) {
        s.moments[name] = {m.at("first").get<std::vector<double>>(),
                           m.at("second").get<std::vector<double>>(),
                           m.at("updates").get<std::uint64_t>()};
    }
    return s;
}

}  // namespace

json checkpoint_to_json(const Checkpoint& c) {
    json params = json::object();
    for (const auto& p : c.model.parameters()) {
        const auto data = p.tensor.data();
        params[p.name] = {{"shape", {p.tensor.rows(), p.tensor.cols()}},
                          {"data", std::vector<double>(data.begin(), data.end())}};
    }
    json stages = json::array();
    for (Stage s : c.completed_stages) {
        stages.push_back(stage_name(s));
    }
    json progress = nullptr;
    if (c.in_progress) {
        progress = {{"stage", stage_name(c.in_progress->stage)},
                    {"steps_done", c.in_progress->steps_done},
                    {"optimizer", optimizer_to_json(c.in_progress->optimizer)}};
    }
    return {{"schema", kCheckpointSchema},
            {"version", kCheckpointSchemaVersion},
            {"model_config", pipeline::model_config_to_json(c.model.config)},
            {"completed_stages", std::move(stages)},
            {"in_progress", std::move(progress)},
            {"train_config", c.config ? train_config_to_json(*c.config) : json(nullptr)},
            {"parameters", std::move(params)}};
}

Checkpoint checkpoint_from_json(const json& j) {
    if (!j.is_object() || j.value("schema", "") != kCheckpointSchema) {
        throw DataError("not a checkpoint (schema field missing or different)");
    }
    if (j.value("version", -1) != kCheckpointSchemaVersion) {
        throw DataError("checkpoint schema version " + j.value("version", json(-1)).dump() +
                        " is not supported (expected " + std::to_string(kCheckpointSchemaVersion) +
                        ")");
    }
    try {
        Checkpoint c;
        c.model = Model::create(pipeline::model_config_from_json(j.at("model_config"),
                                                                 "checkpoint.model_config"));
        const json& params = j.at("parameters");
        std::set<std::string> seen;
        for (auto& p : c.model.parameters()) {
            if (!params.contains(p.name)) {
                throw DataError("checkpoint lacks parameter '" + p.name + "'");
            }
            const json& entry = params.at(p.name);
            const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
            const auto data = entry.at("data").get<std::vector<double>>();
            if (shape.size() != 2 || shape[0] != p.tensor.rows() || shape[1] != p.tensor.cols() ||
                data.size() != p.tensor.size()) {
                throw DataError("checkpoint parameter '" + p.name + "' has shape " +
                                entry.at("shape").dump() + ", model expects " +
                                to_string(p.tensor.shape()));
            }
            std::copy(data.begin(), data.end(), p.tensor.mutable_data().begin());
            seen.insert(p.name);
        }
        for (const auto& item : params.items()) {
            if (!seen.count(item.key())) {
                throw DataError("checkpoint has unknown parameter '" + item.key() + "'");
            }
        }
        for (const auto& s : j.at("completed_stages")) {
            c.completed_stages.push_back(parse_stage(s.get<std::string>()));
        }
        const json& progress = j.at("in_progress");
        if (!progress.is_null()) {
            c.in_progress = StageProgress{parse_stage(progress.at("stage").get<std::string>()),
                                          progress.at("steps_done").get<std::size_t>(),
                                          optimizer_from_json(progress.at("optimizer"))};
        }
        const json& config = j.at("train_config");
        if (!config.is_null()) {
            c.config = train_config_from_json(config, "checkpoint.train_config");
        }
        return c;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << checkpoint_to_json(checkpoint).dump() << '\n';
    if (!out) {
        throw DataError("write failed for " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot read " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace attentrack::train

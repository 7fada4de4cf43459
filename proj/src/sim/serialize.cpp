// SPDX-License-Identifier: Apache-2.0
#include "attentrack/sim/serialize.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "attentrack/error.hpp"
#include "attentrack/json_fields.hpp"

namespace attentrack::sim {

using nlohmann::json;

json config_to_json(const ScenarioConfig& c) {
    json weights = json::object();
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        weights[std::string(class_name(kAllClasses[i]))] = c.class_weights[i];
    }
    return json{
        {"num_frames", c.num_frames},
        {"period_s", c.period_s},
        {"half_extent_m", c.half_extent_m},
        {"initial_objects", c.initial_objects},
        {"max_objects", c.max_objects},
        {"birth_rate", c.birth_rate},
        {"death_prob", c.death_prob},
        {"speed_fraction_max", c.speed_fraction_max},
        {"accel_noise", c.accel_noise},
        {"yaw_rate_noise", c.yaw_rate_noise},
        {"ego_speed", c.ego_speed},
        {"ego_yaw_rate", c.ego_yaw_rate},
        {"p_miss", c.p_miss},
        {"clutter_rate", c.clutter_rate},
        {"sigma_pos_m", c.sigma_pos_m},
        {"sigma_heading_rad", c.sigma_heading_rad},
        {"sigma_size_m", c.sigma_size_m},
        {"class_logit_noise", c.class_logit_noise},
        {"true_score", {{"a", c.true_score.a}, {"b", c.true_score.b}}},
        {"clutter_score", {{"a", c.clutter_score.a}, {"b", c.clutter_score.b}}},
        {"class_weights", weights},
    };
}

namespace {

BetaParams beta_from_json(FieldReader& parent, const std::string& key, BetaParams value) {
    if (!parent.has(key)) {
        return value;
    }
    FieldReader reader(parent.at(key), parent.child(key));
    reader.read("a", value.a);
    reader.read("b", value.b);
    reader.finish();
    return value;
}

}  // namespace

ScenarioConfig config_from_json(const json& j, const std::string& path) {
    ScenarioConfig c;
    FieldReader r(j, path);
    r.read("num_frames", c.num_frames);
    r.read("period_s", c.period_s);
    r.read("half_extent_m", c.half_extent_m);
    r.read("initial_objects", c.initial_objects);
    r.read("max_objects", c.max_objects);
    r.read("birth_rate", c.birth_rate);
    r.read("death_prob", c.death_prob);
    r.read("speed_fraction_max", c.speed_fraction_max);
    r.read("accel_noise", c.accel_noise);
    r.read("yaw_rate_noise", c.yaw_rate_noise);
    r.read("ego_speed", c.ego_speed);
    r.read("ego_yaw_rate", c.ego_yaw_rate);
    r.read("p_miss", c.p_miss);
    r.read("clutter_rate", c.clutter_rate);
    r.read("sigma_pos_m", c.sigma_pos_m);
    r.read("sigma_heading_rad", c.sigma_heading_rad);
    r.read("sigma_size_m", c.sigma_size_m);
    r.read("class_logit_noise", c.class_logit_noise);
    c.true_score = beta_from_json(r, "true_score", c.true_score);
    c.clutter_score = beta_from_json(r, "clutter_score", c.clutter_score);
    if (r.has("class_weights")) {
        FieldReader weights(r.at("class_weights"), r.child("class_weights"));
        for (std::size_t i = 0; i < kNumClasses; ++i) {
            weights.read(std::string(class_name(kAllClasses[i])), c.class_weights[i]);
        }
        weights.finish();
    }
    r.finish();
    try {
        c.validate();
    } catch (const ConfigError& e) {
        // validate() reports paths rooted at "scenario"; re-root them.
        std::string message = e.what();
        if (path != "scenario" && message.rfind("scenario.", 0) == 0) {
            message = path + message.substr(8);
        }
        throw ConfigError(message);
    }
    return c;
}

json frame_to_json(const Frame& f) {
    json gts = json::array();
    for (const ObjectState& o : f.gt_objects) {
        gts.push_back({{"gt_id", o.gt_id},
                       {"class", class_name(o.cls)},
                       {"x", o.position.x},
                       {"y", o.position.y},
                       {"heading", o.heading},
                       {"speed", o.speed},
                       {"length", o.size.length},
                       {"width", o.size.width}});
    }
    json dets = json::array();
    for (const DetectionQuery& d : f.detections) {
        json det = {{"x", d.position.x},
                    {"y", d.position.y},
                    {"heatmap_score", d.heatmap_score},
                    {"class_logits", d.class_logits},
                    {"heading", d.heading_meas},
                    {"length", d.size_meas.length},
                    {"width", d.size_meas.width},
                    {"source_gt", nullptr}};
        if (d.source_gt) {
            det["source_gt"] = *d.source_gt;
        }
        dets.push_back(std::move(det));
    }
    return json{{"frame", f.index},
                {"timestamp", f.timestamp},
                {"ego_pose", {f.ego_pose.x, f.ego_pose.y, f.ego_pose.yaw}},
                {"gt_objects", std::move(gts)},
                {"detections", std::move(dets)}};
}

Frame frame_from_json(const json& j) {
    try {
        Frame f;
        f.index = j.at("frame").get<std::size_t>();
        f.timestamp = j.at("timestamp").get<double>();
        const auto& pose = j.at("ego_pose");
        f.ego_pose = {pose.at(0).get<double>(), pose.at(1).get<double>(), pose.at(2).get<double>()};
        for (const auto& o : j.at("gt_objects")) {
            ObjectState s;
            s.gt_id = o.at("gt_id").get<std::int64_t>();
            s.cls = parse_class(o.at("class").get<std::string>());
            s.position = {o.at("x").get<double>(), o.at("y").get<double>()};
            s.heading = o.at("heading").get<double>();
            s.speed = o.at("speed").get<double>();
            s.size = {o.at("length").get<double>(), o.at("width").get<double>()};
            f.gt_objects.push_back(s);
        }
        for (const auto& d : j.at("detections")) {
            DetectionQuery q;
            q.position = {d.at("x").get<double>(), d.at("y").get<double>()};
            q.heatmap_score = d.at("heatmap_score").get<double>();
            q.class_logits = d.at("class_logits").get<std::array<double, kNumClasses>>();
            q.heading_meas = d.at("heading").get<double>();
            q.size_meas = {d.at("length").get<double>(), d.at("width").get<double>()};
            if (!d.at("source_gt").is_null()) {
                q.source_gt = d.at("source_gt").get<std::int64_t>();
            }
            if (!(q.heatmap_score >= 0.0 && q.heatmap_score <= 1.0)) {
                throw DataError("detection heatmap_score outside [0, 1]");
            }
            f.detections.push_back(q);
        }
        return f;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed frame record: ") + e.what());
    }
}

void write_scenario(std::ostream& out, const Scenario& scenario) {
    const json header = {{"schema", kScenarioSchema},
                         {"version", kScenarioSchemaVersion},
                         {"seed", scenario.seed},
                         {"num_frames", scenario.frames.size()},
                         {"config", config_to_json(scenario.config)}};
    out << header.dump() << '\n';
    for (const Frame& f : scenario.frames) {
        out << frame_to_json(f).dump() << '\n';
    }
}

Scenario read_scenario(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("scenario file is empty");
    }
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError(std::string("scenario header is not JSON: ") + e.what());
    }
    if (!header.is_object() || header.value("schema", "") != kScenarioSchema) {
        throw DataError("not a scenario file (schema field missing or different)");
    }
    if (header.value("version", -1) != kScenarioSchemaVersion) {
        throw DataError("scenario schema version " + header.value("version", json(-1)).dump() +
                        " is not supported (expected " + std::to_string(kScenarioSchemaVersion) +
                        ")");
    }
    Scenario scenario;
    try {
        scenario.seed = header.at("seed").get<std::uint64_t>();
        scenario.config = config_from_json(header.at("config"), "header.config");
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed scenario header: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    }
    const auto expected_frames = header.value("num_frames", std::size_t{0});
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        try {
            scenario.frames.push_back(frame_from_json(json::parse(line)));
        } catch (const json::parse_error& e) {
            throw DataError(std::string("frame line is not JSON: ") + e.what());
        }
    }
    if (scenario.frames.size() != expected_frames) {
        throw DataError("scenario declares " + std::to_string(expected_frames) + " frames but has " +
                        std::to_string(scenario.frames.size()));
    }
    return scenario;
}

void save_scenario(const std::filesystem::path& path, const Scenario& scenario) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    write_scenario(out, scenario);
    if (!out) {
        throw DataError("write failed for " + path.string());
    }
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot read " + path.string());
    }
    return read_scenario(in);
}

}  // namespace attentrack::sim

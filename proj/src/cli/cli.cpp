// SPDX-License-Identifier: Apache-2.0
#include "attentrack/cli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <vector>

#include <CLI11.hpp>

#include "attentrack/error.hpp"
#include "attentrack/json_fields.hpp"
#include "attentrack/metrics/mot.hpp"
#include "attentrack/parallel.hpp"
#include "attentrack/pipeline/tracker.hpp"
#include "attentrack/rng.hpp"
#include "attentrack/sim/serialize.hpp"

namespace attentrack::cli {

namespace fs = std::filesystem;
using nlohmann::json;

json run_config_to_json(const RunConfig& c) {
    json train = train::train_config_to_json(c.train);
    train.erase("stage");  // chosen per invocation with --stage
    train.erase("seed");   // --seed
    return {{"scenario", sim::config_to_json(c.scenario)},
            {"num_scenarios", c.num_scenarios},
            {"model", pipeline::model_config_to_json(c.model)},
            {"train", std::move(train)}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    FieldReader r(j, "config");
    if (r.has("scenario")) {
        c.scenario = sim::config_from_json(r.at("scenario"), r.child("scenario"));
    }
    r.read("num_scenarios", c.num_scenarios);
    if (r.has("model")) {
        c.model = pipeline::model_config_from_json(r.at("model"), r.child("model"));
    }
    if (r.has("train")) {
        const json& t = r.at("train");
        for (const char* key : {"stage", "seed"}) {
            if (t.is_object() && t.contains(key)) {
                throw ConfigError(r.child("train") + "." + key +
                                  ": set on the command line, not in the config");
            }
        }
        c.train = train::train_config_from_json(t, r.child("train"));
    }
    r.finish();
    if (c.num_scenarios == 0) {
        throw ConfigError("config.num_scenarios: must be positive");
    }
    c.scenario.validate();
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot read config " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string file_hash(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot read " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(buf.str())));
    return hex;
}

std::string scenario_file_name(std::size_t index) {
    char name[32];
    std::snprintf(name, sizeof name, "scenario_%04zu.jsonl", index);
    return name;
}

std::string tracks_file_name(std::size_t index) {
    char name[32];
    std::snprintf(name, sizeof name, "tracks_%04zu.jsonl", index);
    return name;
}

namespace {

struct CommonOptions {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out;
    std::size_t jobs = 1;
};

class Manifest {
public:
    Manifest(std::string command, const CommonOptions& common)
        : command_(std::move(command)), common_(common), start_(std::chrono::steady_clock::now()) {}

    void set(const std::string& key, json value) { extra_[key] = std::move(value); }
    void input(const fs::path& p) { inputs_.push_back(p); }
    void output(const fs::path& p) { outputs_.push_back(p); }

    void write(const fs::path& dir) const {
        auto files = [](const std::vector<fs::path>& paths) {
            json list = json::array();
            for (const auto& p : paths) {
                list.push_back({{"path", p.generic_string()}, {"fnv1a64", file_hash(p)}});
            }
            return list;
        };
        json m = {{"command", command_},
                  {"config_path", common_.config_path},
                  {"seed", common_.seed},
                  {"inputs", files(inputs_)},
                  {"outputs", files(outputs_)}};
        for (const auto& [k, v] : extra_.items()) {
            m[k] = v;
        }
        m["wall_time_s"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        write_text(dir / kManifestFile, m.dump(2) + "\n");
    }

    static void write_text(const fs::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary);
        if (!out || !(out << text)) {
            throw DataError("cannot write " + path.string());
        }
    }

private:
    std::string command_;
    CommonOptions common_;
    std::chrono::steady_clock::time_point start_;
    json extra_ = json::object();
    std::vector<fs::path> inputs_;
    std::vector<fs::path> outputs_;
};

RunConfig resolve_config(const CommonOptions& common) {
    return common.config_path.empty() ? RunConfig{} : load_run_config(common.config_path);
}

fs::path prepare_out_dir(const CommonOptions& common) {
    if (common.out.empty()) {
        throw ConfigError("--out: an output directory is required");
    }
    const fs::path dir(common.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw DataError("cannot create output directory " + dir.string());
    }
    return dir;
}

std::vector<fs::path> list_files(const fs::path& dir, std::string_view prefix) {
    if (!fs::is_directory(dir)) {
        throw DataError("not a directory: " + dir.string());
    }
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.rfind(prefix, 0) == 0 && entry.path().extension() == ".jsonl") {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) {
        throw DataError("no " + std::string(prefix) + "*.jsonl files in " + dir.string());
    }
    return out;
}

std::vector<sim::Scenario> load_pool(const fs::path& dir, Manifest& manifest, std::size_t jobs) {
    const auto files = list_files(dir, "scenario_");
    std::vector<sim::Scenario> pool(files.size());
    parallel_for(files.size(), jobs, [&](std::size_t i) { pool[i] = sim::load_scenario(files[i]); });
    for (const auto& f : files) {
        manifest.input(f);
    }
    return pool;
}

std::string write_to_string(const auto& writer) {
    std::ostringstream s;
    writer(s);
    return s.str();
}

// ---------------------------------------------------------------- gen

int cmd_gen(const CommonOptions& common, std::ostream& out) {
    Manifest manifest("gen", common);
    const RunConfig cfg = resolve_config(common);
    const fs::path dir = prepare_out_dir(common);
    std::vector<std::string> texts(cfg.num_scenarios);
    parallel_for(cfg.num_scenarios, common.jobs, [&](std::size_t i) {
        const sim::Scenario s = sim::generate_scenario(cfg.scenario, derive_seed(common.seed, i));
        texts[i] = write_to_string([&](std::ostream& o) { sim::write_scenario(o, s); });
    });
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const fs::path path = dir / scenario_file_name(i);
        Manifest::write_text(path, texts[i]);
        manifest.output(path);
    }
    manifest.set("config", run_config_to_json(cfg));
    manifest.write(dir);
    out << "wrote " << texts.size() << " scenarios to " << dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
    std::string stage;
    std::string data;
    std::string init;
    std::string resume;
    std::optional<std::size_t> stop_after;
    std::string mode;
};

std::optional<train::Stage> required_before(train::Stage stage) {
    switch (stage) {
        case train::Stage::encoder:
            return std::nullopt;
        case train::Stage::da_frozen:
            return train::Stage::encoder;
        case train::Stage::joint:
            return train::Stage::da_frozen;
    }
    return std::nullopt;
}

bool has_stage(const train::Checkpoint& c, train::Stage s) {
    return std::find(c.completed_stages.begin(), c.completed_stages.end(), s) !=
           c.completed_stages.end();
}

int cmd_train(const CommonOptions& common, const TrainOptions& opt, std::ostream& out) {
    Manifest manifest("train", common);
    const train::Stage stage = train::parse_stage(opt.stage);
    RunConfig cfg = resolve_config(common);
    if (opt.data.empty()) {
        throw ConfigError("--data: a scenario directory is required");
    }
    if (!opt.init.empty() && !opt.resume.empty()) {
        throw ConfigError("--init and --resume are mutually exclusive");
    }

    train::Checkpoint ckpt;
    std::optional<train::StageProgress> progress;
    train::TrainConfig tc = cfg.train;
    tc.stage = stage;
    tc.seed = common.seed;
    if (!opt.resume.empty()) {
        ckpt = train::load_checkpoint(opt.resume);
        manifest.input(opt.resume);
        if (!ckpt.in_progress || ckpt.in_progress->stage != stage || !ckpt.config) {
            throw ContractError("--resume: " + opt.resume + " holds no unfinished " +
                                std::string(train::stage_name(stage)) + " run");
        }
        // the interrupted run's settings win so the continuation is exact
        tc = *ckpt.config;
        progress = ckpt.in_progress;
    } else if (const auto before = required_before(stage)) {
        if (opt.init.empty()) {
            throw ContractError("stage " + std::string(train::stage_name(stage)) +
                                " needs a checkpoint that finished stage " +
                                std::string(train::stage_name(*before)) + " (--init)");
        }
        ckpt = train::load_checkpoint(opt.init);
        manifest.input(opt.init);
        if (!has_stage(ckpt, *before) || ckpt.in_progress) {
            throw ContractError("stage order: " + opt.init + " has not finished stage " +
                                std::string(train::stage_name(*before)));
        }
    } else {
        if (!opt.init.empty()) {
            throw ContractError("stage encoder starts from freshly initialized weights; drop --init");
        }
        if (!opt.mode.empty()) {
            cfg.model.mode = pipeline::parse_mode(opt.mode);
        }
        cfg.model.init_seed = common.seed;
        ckpt.model = pipeline::Model::create(cfg.model);
    }
    if (!opt.mode.empty() && pipeline::parse_mode(opt.mode) != ckpt.model.config.mode) {
        throw ConfigError("--mode: checkpoint was trained for " +
                          std::string(pipeline::mode_name(ckpt.model.config.mode)));
    }

    const fs::path dir = prepare_out_dir(common);
    const auto pool = load_pool(opt.data, manifest, common.jobs);
    const auto result = train::train_stage(ckpt.model, tc, pool, progress ? &*progress : nullptr,
                                           opt.stop_after);

    if (result.finished()) {
        ckpt.completed_stages.push_back(stage);
        ckpt.in_progress.reset();
    } else {
        ckpt.in_progress = result.progress;
    }
    ckpt.config = tc;
    const fs::path ckpt_path = dir / kCheckpointFile;
    train::save_checkpoint(ckpt_path, ckpt);
    const fs::path loss_path = dir / kLossFile;
    Manifest::write_text(loss_path, write_to_string([&](std::ostream& o) {
                             train::write_loss_csv(o, result.curve);
                         }));
    manifest.output(ckpt_path);
    manifest.output(loss_path);

    const auto trainable = train::trainable_groups(stage, ckpt.model.config);
    json frozen = json::array();
    for (const auto& p : ckpt.model.parameters()) {
        const std::string g(pipeline::group_of(p.name));
        if (std::find(trainable.begin(), trainable.end(), g) == trainable.end() &&
            std::find(frozen.begin(), frozen.end(), g) == frozen.end()) {
            frozen.push_back(g);
        }
    }
    manifest.set("stage", train::stage_name(stage));
    manifest.set("trainable_groups", trainable);
    manifest.set("frozen_groups", frozen);
    manifest.set("steps_done", result.progress.steps_done);
    manifest.set("total_steps", tc.total_steps());
    manifest.set("model_config", pipeline::model_config_to_json(ckpt.model.config));
    manifest.set("train_config", train::train_config_to_json(tc));
    manifest.set("config", run_config_to_json(cfg));
    manifest.write(dir);

    out << "stage " << train::stage_name(stage) << ": " << result.progress.steps_done << "/"
        << tc.total_steps() << " steps";
    if (!result.curve.empty()) {
        out << ", last loss " << result.curve.back().loss;
    }
    out << "\n";
    return 0;
}

// ---------------------------------------------------------------- track

struct TrackOptions {
    std::string model;
    std::string data;
    std::string mode;
};

pipeline::Mode checked_mode(const pipeline::Model& model, const std::string& requested) {
    if (!requested.empty() && pipeline::parse_mode(requested) != model.config.mode) {
        throw ConfigError("--mode: checkpoint was trained for " +
                          std::string(pipeline::mode_name(model.config.mode)));
    }
    return model.config.mode;
}

int cmd_track(const CommonOptions& common, const TrackOptions& opt, std::ostream& out) {
    Manifest manifest("track", common);
    if (opt.model.empty() || opt.data.empty()) {
        throw ConfigError("--model and --data are required");
    }
    const train::Checkpoint ckpt = train::load_checkpoint(opt.model);
    manifest.input(opt.model);
    const pipeline::Mode mode = checked_mode(ckpt.model, opt.mode);
    const fs::path dir = prepare_out_dir(common);
    const auto pool = load_pool(opt.data, manifest, 1);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto output = pipeline::run_sequence(pool[i], ckpt.model, mode);
        const fs::path path = dir / tracks_file_name(i);
        Manifest::write_text(path, write_to_string([&](std::ostream& o) {
                                 pipeline::write_tracks(o, output, pool[i].seed, mode);
                             }));
        manifest.output(path);
    }
    manifest.set("mode", pipeline::mode_name(mode));
    manifest.write(dir);
    out << "tracked " << pool.size() << " scenarios into " << dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
    std::string tracks;
    std::string gt;
    std::size_t n_points = 40;
    double match_threshold_m = 2.0;
};

metrics::AmotaConfig amota_config(const CommonOptions& common, std::size_t n_points, double threshold) {
    metrics::AmotaConfig config;
    config.n_points = n_points;
    config.match_threshold_m = threshold;
    config.jobs = common.jobs;
    if (n_points < 2) {
        throw ConfigError("--n-points: must be at least 2");
    }
    if (!(threshold > 0.0)) {
        throw ConfigError("--match-threshold-m: must be positive");
    }
    return config;
}

void write_report(const fs::path& dir, const metrics::MetricsReport& report, Manifest& manifest,
                  const std::string& stem = "report") {
    const fs::path json_path = dir / (stem + ".json");
    const fs::path csv_path = dir / (stem + ".csv");
    Manifest::write_text(json_path, metrics::report_to_json(report).dump(2) + "\n");
    Manifest::write_text(csv_path, write_to_string([&](std::ostream& o) {
                             metrics::write_report_csv(o, report);
                         }));
    manifest.output(json_path);
    manifest.output(csv_path);
}

int cmd_eval(const CommonOptions& common, const EvalOptions& opt, std::ostream& out) {
    Manifest manifest("eval", common);
    if (opt.tracks.empty() || opt.gt.empty()) {
        throw ConfigError("--tracks and --gt are required");
    }
    const auto config = amota_config(common, opt.n_points, opt.match_threshold_m);
    const auto gt_files = list_files(opt.gt, "scenario_");
    const auto track_files = list_files(opt.tracks, "tracks_");
    if (gt_files.size() != track_files.size()) {
        throw DataError("found " + std::to_string(track_files.size()) + " track files for " +
                        std::to_string(gt_files.size()) + " scenarios");
    }
    const fs::path dir = prepare_out_dir(common);
    std::vector<metrics::Sequence> sequences(gt_files.size());
    parallel_for(gt_files.size(), common.jobs, [&](std::size_t i) {
        const sim::Scenario scenario = sim::load_scenario(gt_files[i]);
        std::ifstream in(track_files[i], std::ios::binary);
        if (!in) {
            throw DataError("cannot read " + track_files[i].string());
        }
        const auto loaded = pipeline::read_tracks(in);
        if (loaded.scenario_seed != scenario.seed) {
            throw DataError(track_files[i].string() + " was produced for scenario seed " +
                            std::to_string(loaded.scenario_seed) + ", " + gt_files[i].string() +
                            " has seed " + std::to_string(scenario.seed));
        }
        sequences[i] = metrics::make_sequence(scenario, loaded.output);
    });
    for (std::size_t i = 0; i < gt_files.size(); ++i) {
        manifest.input(track_files[i]);
        manifest.input(gt_files[i]);
    }
    const auto report = metrics::compute_amota(sequences, config);
    write_report(dir, report, manifest);
    manifest.set("n_points", opt.n_points);
    manifest.set("match_threshold_m", opt.match_threshold_m);
    manifest.write(dir);
    out << "AMOTA " << report.overall.amota << " MOTA " << report.overall.mota << " IDS "
        << report.overall.ids << "\n";
    return 0;
}

// ---------------------------------------------------------------- ablate

struct AblateOptions {
    std::string which;
    std::string arm_a;
    std::string arm_b;
    std::string data;
    std::size_t n_points = 40;
    double match_threshold_m = 2.0;
};

int cmd_ablate(const CommonOptions& common, const AblateOptions& opt, std::ostream& out) {
    Manifest manifest("ablate", common);
    const bool da = opt.which == "da_transformer";
    if (!da && opt.which != "qem") {
        throw ConfigError("--which: expected da_transformer or qem, got '" + opt.which + "'");
    }
    if (opt.arm_a.empty() || opt.arm_b.empty() || opt.data.empty()) {
        throw ConfigError("--arm-a, --arm-b and --data are required");
    }
    const auto config = amota_config(common, opt.n_points, opt.match_threshold_m);
    for (const auto& p : {opt.arm_a, opt.arm_b}) {
        if (!fs::exists(p)) {
            throw DataError("missing arm checkpoint " + p);
        }
    }
    const train::Checkpoint a = train::load_checkpoint(opt.arm_a);
    const train::Checkpoint b = train::load_checkpoint(opt.arm_b);
    manifest.input(opt.arm_a);
    manifest.input(opt.arm_b);
    auto has_component = [da](const pipeline::ModelConfig& c) {
        return da ? c.da_transformer : c.use_qem;
    };
    if (!has_component(a.model.config) || has_component(b.model.config)) {
        throw ConfigError("--arm-a must have " + opt.which + " on and --arm-b must have it off");
    }
    const fs::path dir = prepare_out_dir(common);
    const auto pool = load_pool(opt.data, manifest, common.jobs);

    const std::string label = da ? "Transformer" : "Query Enhance";
    const std::string names[2] = {"w/ " + label, "w/o " + label};
    const train::Checkpoint* arms[2] = {&a, &b};
    metrics::MetricsReport reports[2];
    double det_error[2] = {0.0, 0.0};
    for (int k = 0; k < 2; ++k) {
        const pipeline::Model& model = arms[k]->model;
        std::vector<metrics::Sequence> sequences;
        for (const auto& s : pool) {
            sequences.push_back(
                metrics::make_sequence(s, pipeline::run_sequence(s, model, model.config.mode)));
        }
        reports[k] = metrics::compute_amota(sequences, config);
        write_report(dir, reports[k], manifest, k == 0 ? "report_arm_a" : "report_arm_b");
        if (!da) {
            const std::size_t context =
                arms[k]->config ? arms[k]->config->context_frames : train::TrainConfig{}.context_frames;
            det_error[k] = train::detection_error(model, train::all_pairs(pool, context));
        }
    }

    std::ostringstream table;
    table << "metric,arm,value\n";
    auto row = [&](const char* metric, auto get) {
        for (int k = 0; k < 2; ++k) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6f", static_cast<double>(get(k)));
            table << metric << ',' << names[k] << ',' << buf << '\n';
        }
    };
    row("AMOTA", [&](int k) { return reports[k].overall.amota; });
    row("AMOTP", [&](int k) { return reports[k].overall.amotp; });
    row("MOTA", [&](int k) { return reports[k].overall.mota; });
    row("Recall", [&](int k) { return reports[k].overall.recall; });
    row("IDS", [&](int k) { return static_cast<double>(reports[k].overall.ids); });
    if (!da) {
        row("det_error", [&](int k) { return det_error[k]; });
        row("car_AMOTA", [&](int k) {
            const auto& car = reports[k].classes[static_cast<std::size_t>(sim::ObjectClass::car)];
            return car ? car->amota : 0.0;
        });
    }
    const fs::path table_path = dir / kAblationCsv;
    Manifest::write_text(table_path, table.str());
    manifest.output(table_path);
    manifest.set("which", opt.which);
    manifest.set("arms", {{"a", {{"name", names[0]},
                                 {"checkpoint", opt.arm_a},
                                 {"model_config", pipeline::model_config_to_json(a.model.config)}}},
                          {"b", {{"name", names[1]},
                                 {"checkpoint", opt.arm_b},
                                 {"model_config", pipeline::model_config_to_json(b.model.config)}}}});
    manifest.write(dir);
    out << table.str();
    return 0;
}

void add_common(CLI::App* app, CommonOptions& common, bool needs_jobs) {
    app->add_option("--config", common.config_path, "run configuration (JSON)");
    app->add_option("--seed", common.seed, "base seed; ATTENTRACK_SEED overrides it");
    app->add_option("--out", common.out, "output directory")->required();
    if (needs_jobs) {
        app->add_option("--jobs", common.jobs, "worker threads")->check(CLI::PositiveNumber);
    }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Transformer data-association tracker on a synthetic BEV world", "attentrack"};
    app.require_subcommand(1);

    CommonOptions common;
    TrainOptions train_opt;
    TrackOptions track_opt;
    EvalOptions eval_opt;
    AblateOptions ablate_opt;

    auto* gen = app.add_subcommand("gen", "generate scenario files");
    add_common(gen, common, true);

    auto* tr = app.add_subcommand("train", "run one training stage");
    add_common(tr, common, false);
    tr->add_option("--stage", train_opt.stage, "encoder | da_frozen | joint")->required();
    tr->add_option("--data", train_opt.data, "directory of scenario files")->required();
    tr->add_option("--init", train_opt.init, "checkpoint of the previous stage");
    tr->add_option("--resume", train_opt.resume, "unfinished checkpoint of this stage");
    tr->add_option("--stop-after", train_opt.stop_after, "stop after this many total steps");
    tr->add_option("--mode", train_opt.mode, "lidar_only | fusion");

    auto* tk = app.add_subcommand("track", "run the tracker over scenario files");
    add_common(tk, common, false);
    tk->add_option("--model", track_opt.model, "checkpoint")->required();
    tk->add_option("--data", track_opt.data, "directory of scenario files")->required();
    tk->add_option("--mode", track_opt.mode, "lidar_only | fusion");

    auto* ev = app.add_subcommand("eval", "score tracks against ground truth");
    add_common(ev, common, true);
    ev->add_option("--tracks", eval_opt.tracks, "directory of track files")->required();
    ev->add_option("--gt", eval_opt.gt, "directory of scenario files")->required();
    ev->add_option("--n-points", eval_opt.n_points, "recall points for AMOTA");
    ev->add_option("--match-threshold-m", eval_opt.match_threshold_m, "center distance gate (m)");

    auto* ab = app.add_subcommand("ablate", "compare two checkpoints differing in one component");
    add_common(ab, common, false);
    ab->add_option("--which", ablate_opt.which, "da_transformer | qem")->required();
    ab->add_option("--arm-a", ablate_opt.arm_a, "checkpoint with the component")->required();
    ab->add_option("--arm-b", ablate_opt.arm_b, "checkpoint without it")->required();
    ab->add_option("--data", ablate_opt.data, "directory of scenario files")->required();
    ab->add_option("--n-points", ablate_opt.n_points, "recall points for AMOTA");
    ab->add_option("--match-threshold-m", ablate_opt.match_threshold_m, "center distance gate (m)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (const char* env = std::getenv("ATTENTRACK_SEED"); env != nullptr && *env != '\0') {
            char* end = nullptr;
            const unsigned long long v = std::strtoull(env, &end, 10);
            if (end == nullptr || *end != '\0' || *env == '-') {
                throw ConfigError(std::string("ATTENTRACK_SEED: expected a non-negative integer, got '") +
                                  env + "'");
            }
            common.seed = v;
        }
        if (gen->parsed()) {
            return cmd_gen(common, out);
        }
        if (tr->parsed()) {
            return cmd_train(common, train_opt, out);
        }
        if (tk->parsed()) {
            return cmd_track(common, track_opt, out);
        }
        if (ev->parsed()) {
            return cmd_eval(common, eval_opt, out);
        }
        return cmd_ablate(common, ablate_opt, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace attentrack::cli

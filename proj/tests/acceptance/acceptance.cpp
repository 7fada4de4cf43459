// SPDX-License-Identifier: Apache-2.0
// One line per acceptance criterion; exit status is non-zero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "attentrack/metrics/mot.hpp"
#include "attentrack/pipeline/tracker.hpp"
#include "attentrack/train/train.hpp"
#include "exhaustive.hpp"
#include "layer_checks.hpp"
#include "metric_cases.hpp"

using namespace attentrack;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<sim::Scenario> make_pool(const sim::ScenarioConfig& cfg, std::uint64_t first_seed, std::size_t n) {
    std::vector<sim::Scenario> pool;
    for (std::size_t i = 0; i < n; ++i) pool.push_back(sim::generate_scenario(cfg, first_seed + i));
    return pool;
}

train::TrainConfig stage_config(train::Stage stage, std::size_t steps, std::uint64_t seed = 7) {
    train::TrainConfig tc;
    tc.stage = stage;
    tc.steps_per_epoch = steps;
    tc.seed = seed;
    return tc;
}

void train_three_stages(pipeline::Model& model, const std::vector<sim::Scenario>& pool, std::size_t steps,
                        const std::function<void(const pipeline::Model&)>& after_encoder = {}) {
    train::train_stage(model, stage_config(train::Stage::encoder, steps), pool);
    if (after_encoder) after_encoder(model);
    train::train_stage(model, stage_config(train::Stage::da_frozen, steps), pool);
    train::train_stage(model, stage_config(train::Stage::joint, steps), pool);
}

metrics::MetricsReport track_and_score(const pipeline::Model& model, const std::vector<sim::Scenario>& test) {
    std::vector<metrics::Sequence> seqs;
    for (const auto& s : test) seqs.push_back(metrics::make_sequence(s, pipeline::run_sequence(s, model, model.config.mode)));
    return metrics::compute_amota(seqs);
}

// ------------------------------------------------------------------ 1
Outcome gradient_integrity() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string where;
    std::size_t entries = 0;
    std::set<std::string> layers;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        for (const auto& c : check::check_all_layers(seed)) {
            layers.insert(c.layer);
            entries += c.result.checked;
            if (c.result.worst_relative > worst) {
                worst = c.result.worst_relative;
                where = c.layer + " " + c.result.worst_entry;
            }
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-4 && secs < 60.0,
            fmt("%zu layers x 20 seeds, %zu entries, worst relative error %.2e (%s), %.1fs", layers.size(), entries,
                worst, where.c_str(), secs)};
}

// ------------------------------------------------------------------ 2
Outcome association_overfit() {
    const auto t0 = std::chrono::steady_clock::now();
    sim::ScenarioConfig sc = sim::ScenarioConfig::standard();
    sc.num_frames = 2;
    const auto pool = make_pool(sc, 500, 50);
    pipeline::Model model = pipeline::Model::create({});
    train::train_stage(model, stage_config(train::Stage::encoder, 1000), pool);
    train::train_stage(model, stage_config(train::Stage::da_frozen, 5000), pool);
    const auto pairs = train::all_pairs(pool);
    const auto eval = train::evaluate_association(model, pairs);
    const double secs = seconds_since(t0);
    return {eval.mean_loss < 0.05 && eval.accuracy >= 0.95 && secs < 300.0,
            fmt("%zu pairs, %zu rows: loss %.4f (< 0.05), accuracy %.4f (>= 0.95), %.1fs", eval.pairs, eval.rows,
                eval.mean_loss, eval.accuracy, secs)};
}

// ------------------------------------------------------------------ 3
Outcome oracle_tracking() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sc = sim::ScenarioConfig::noise_free();
    const auto pool = make_pool(sc, 100, 100);
    const auto test = make_pool(sc, 9000, 20);
    pipeline::Model model = pipeline::Model::create({});
    train_three_stages(model, pool, 5000);
    const auto report = track_and_score(model, test);
    const double secs = seconds_since(t0);
    return {report.overall.ids == 0 && report.overall.amota >= 0.95 && secs < 120.0,
            fmt("20 noise-free scenarios x 40 frames: IDS %zu (= 0), AMOTA %.4f (>= 0.95), MOTA %.4f, %.1fs incl. training",
                report.overall.ids, report.overall.amota, report.overall.mota, secs)};
}

// ------------------------------------------------------------------ 4 and 5 share the noisy pools
struct NoisyBench {
    std::vector<sim::Scenario> pool = make_pool(sim::ScenarioConfig::standard(), 100, 100);
    std::vector<sim::Scenario> test = make_pool(sim::ScenarioConfig::standard(), 9000, 20);
    std::vector<train::TrainingPair> test_pairs = train::all_pairs(test, train::TrainConfig{}.context_frames);
    double det_error_with_qem = -1.0;
};

Outcome table5_direction(NoisyBench& bench) {
    const auto t0 = std::chrono::steady_clock::now();
    pipeline::Model with = pipeline::Model::create({});
    train_three_stages(with, bench.pool, 5000, [&](const pipeline::Model& m) {
        bench.det_error_with_qem = train::detection_error(m, bench.test_pairs);
    });
    pipeline::ModelConfig off;
    off.da_transformer = false;
    pipeline::Model without = pipeline::Model::create(off);
    train_three_stages(without, bench.pool, 5000);
    const double a = track_and_score(with, bench.test).overall.amota;
    const double b = track_and_score(without, bench.test).overall.amota;
    const double ratio = b > 0 ? a / b : 0.0;
    const double secs = seconds_since(t0);
    return {ratio >= 1.5 && secs < 900.0,
            fmt("AMOTA w/ Transformer %.4f, w/o Transformer %.4f, ratio %.3f (>= 1.5), direction %s, %.1fs", a, b,
                ratio, a > b ? "matches" : "reversed", secs)};
}

Outcome table6_direction(NoisyBench& bench) {
    const auto t0 = std::chrono::steady_clock::now();
    if (bench.det_error_with_qem < 0) {
        pipeline::Model with = pipeline::Model::create({});
        train::train_stage(with, stage_config(train::Stage::encoder, 5000), bench.pool);
        bench.det_error_with_qem = train::detection_error(with, bench.test_pairs);
    }
    pipeline::ModelConfig off;
    off.use_qem = false;
    pipeline::Model without = pipeline::Model::create(off);
    train::train_stage(without, stage_config(train::Stage::encoder, 5000), bench.pool);
    const double e_without = train::detection_error(without, bench.test_pairs);
    return {bench.det_error_with_qem <= e_without,
            fmt("stage-1 detection MSE w/ Query Enhance %.6f, w/o %.6f (need w/ <= w/o), %.1fs",
                bench.det_error_with_qem, e_without, seconds_since(t0))};
}

// ------------------------------------------------------------------ 6
Outcome metrics_oracle() {
    std::size_t ok = 0;
    std::string bad;
    const auto cases = check::hand_cases();
    for (const auto& c : cases) {
        const auto counts = metrics::evaluate_sequence(c.seq, 2.0);
        if (std::abs(metrics::mota(counts) - c.mota) <= 1e-12 && counts.ids == c.ids && counts.mostly_tracked == c.mt &&
            counts.mostly_lost == c.ml) {
            ++ok;
        } else if (bad.empty()) {
            bad = " first mismatch: " + c.name;
        }
    }
    const std::vector<metrics::Sequence> seqs = {check::two_track_case()};
    const double got = metrics::compute_amota(seqs).overall.amota;
    const double want = check::two_track_amota(40);
    const double err = std::abs(got - want);
    return {ok == cases.size() && err <= 1e-9,
            fmt("%zu/%zu hand cases exact (MOTA, IDS, MT, ML); two-track AMOTA %.12f vs formula %.12f (|diff| %.1e)%s",
                ok, cases.size(), got, want, err, bad.c_str())};
}

// ------------------------------------------------------------------ 7
Outcome greedy_exhaustive() {
    const auto r = check::sweep_greedy({0.0, 1.0, 2.0});
    return {r.ok() && r.multi_dead_cases > 0,
            fmt("%zu matrices (N, M <= 3, grid {0,1,2}): %zu violations; %zu cases with shared dead column%s%s",
                r.cases, r.failures, r.multi_dead_cases, r.failures ? ", first: " : "", r.first_failure.c_str())};
}

// ------------------------------------------------------------------ 8
Outcome fusion_exhaustive() {
    const auto r = check::sweep_fusion();
    return {r.ok(), fmt("%zu decision pairs x score draws (N, M <= 3): %zu violations%s%s", r.cases, r.failures,
                        r.failures ? ", first: " : "", r.first_failure.c_str())};
}

// ------------------------------------------------------------------ 9
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream s;
        s << in.rdbuf();
        std::string text = s.str();
        if (e.path().filename() == "manifest.json") {
            auto j = nlohmann::json::parse(text);
            j.erase("wall_time_s");  // the one field that is allowed to differ
            text = j.dump();
        }
        files[fs::relative(e.path(), root).generic_string()] = std::move(text);
    }
    return files;
}

Outcome cli_determinism(const std::string& cli) {
    if (cli.empty()) return {false, "no --cli binary given"};
    const fs::path root = fs::temp_directory_path() / ("attentrack_accept_" + std::to_string(::getpid()));
    const fs::path work = root / "work";
    fs::remove_all(root);
    fs::create_directories(work);
    {
        std::ofstream(work / "cfg.json") << R"({"num_scenarios": 4, "scenario": {"num_frames": 12},
            "model": {"width": 16, "hidden": 32}, "train": {"steps_per_epoch": 40}})";
    }
    const std::string w = work.string();
    const std::vector<std::string> commands = {
        "gen --config " + w + "/cfg.json --seed 11 --jobs 3 --out " + w + "/data",
        "train --stage encoder --config " + w + "/cfg.json --seed 11 --data " + w + "/data --out " + w + "/s1",
        "train --stage da_frozen --config " + w + "/cfg.json --seed 11 --data " + w + "/data --init " + w +
            "/s1/checkpoint.json --out " + w + "/s2",
        "train --stage joint --config " + w + "/cfg.json --seed 11 --data " + w + "/data --init " + w +
            "/s2/checkpoint.json --out " + w + "/s3",
        "track --model " + w + "/s3/checkpoint.json --data " + w + "/data --out " + w + "/tracks",
        "eval --tracks " + w + "/tracks --gt " + w + "/data --jobs 3 --out " + w + "/eval",
    };
    std::vector<std::map<std::string, std::string>> runs;
    for (int run = 0; run < 2; ++run) {
        for (const auto& c : commands) {
            const std::string line = cli + " " + c + " > /dev/null";
            if (std::system(line.c_str()) != 0) {
                fs::remove_all(root);
                return {false, "command failed: " + c};
            }
        }
        runs.push_back(snapshot(work));
        for (const auto& d : {"data", "s1", "s2", "s3", "tracks", "eval"}) fs::remove_all(work / d);
    }
    fs::remove_all(root);
    std::size_t differing = 0;
    std::string first;
    for (const auto& [name, text] : runs[0]) {
        auto it = runs[1].find(name);
        if (it == runs[1].end() || it->second != text) {
            if (differing++ == 0) first = name;
        }
    }
    const bool same_set = runs[0].size() == runs[1].size();
    return {differing == 0 && same_set && runs[0].size() > 10,
            fmt("gen/train x3/track/eval run twice: %zu files compared, %zu differ%s%s (manifest wall_time_s excluded)",
                runs[0].size(), differing, differing ? ", first: " : "", first.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::string cli;
    std::vector<int> only;
    app.add_option("--cli", cli, "path of the attentrack binary");
    app.add_option("--only", only, "run just these criteria");
    CLI11_PARSE(app, argc, argv);

    auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };
    std::optional<NoisyBench> noisy;  // built on first use, shared by 4 and 5
    auto bench = [&]() -> NoisyBench& { return noisy ? *noisy : noisy.emplace(); };

    const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
        {1, gradient_integrity},
        {2, association_overfit},
        {3, oracle_tracking},
        {4, [&] { return table5_direction(bench()); }},
        {5, [&] { return table6_direction(bench()); }},
        {6, metrics_oracle},
        {7, greedy_exhaustive},
        {8, fusion_exhaustive},
        {9, [&] { return cli_determinism(cli); }},
    };
    const char* names[] = {"",
                           "gradient integrity",
                           "association overfit",
                           "oracle tracking",
                           "Table 5 direction",
                           "Table 6 direction",
                           "metrics oracle",
                           "greedy matcher",
                           "fusion agreement rule",
                           "CLI determinism"};
    int failed = 0;
    for (const auto& [n, fn] : criteria) {
        if (!wanted(n)) continue;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %d [%s] %s: %s\n", n, o.pass ? "PASS" : "FAIL", names[n], o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}

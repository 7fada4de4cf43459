// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include <json.hpp>

#include "attentrack/pipeline/model.hpp"
#include "attentrack/sim/world.hpp"
#include "attentrack/train/train.hpp"

namespace attentrack::cli {

/// Everything a run reads from its --config file. Unknown keys are rejected
/// with their dotted path; missing keys keep the defaults.
struct RunConfig {
    sim::ScenarioConfig scenario;
    std::size_t num_scenarios = 20;
    pipeline::ModelConfig model;
    train::TrainConfig train;
};

nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);
/// Throws DataError if the file cannot be read or parsed, ConfigError on bad
/// content.
RunConfig load_run_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);
/// 16 hex digits of the FNV-1a hash of the file's bytes.
std::string file_hash(const std::filesystem::path& path);

/// Names of the files a command writes inside its output directory.
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kCheckpointFile = "checkpoint.json";
inline constexpr const char* kLossFile = "loss.csv";
inline constexpr const char* kReportJson = "report.json";
inline constexpr const char* kReportCsv = "report.csv";
inline constexpr const char* kAblationCsv = "ablation.csv";

std::string scenario_file_name(std::size_t index);
std::string tracks_file_name(std::size_t index);

/// Entry point of the `attentrack` tool. Returns the process exit status:
/// 0 success, 2 configuration error, 3 data error, 4 contract violation.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace attentrack::cli

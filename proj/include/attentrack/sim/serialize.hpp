// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "attentrack/sim/world.hpp"

namespace attentrack::sim {

inline constexpr const char* kScenarioSchema = "attentrack.scenario";
inline constexpr int kScenarioSchemaVersion = 1;

nlohmann::json config_to_json(const ScenarioConfig& config);
/// Fields absent from `j` keep their defaults; unknown fields and wrong types
/// raise ConfigError with the dotted path (prefixed by `path`).
ScenarioConfig config_from_json(const nlohmann::json& j, const std::string& path = "scenario");

nlohmann::json frame_to_json(const Frame& frame);
Frame frame_from_json(const nlohmann::json& j);

/// JSON-lines: a schema header line, then one frame per line.
void write_scenario(std::ostream& out, const Scenario& scenario);
/// Throws DataError on a malformed file or schema/version mismatch.
Scenario read_scenario(std::istream& in);

void save_scenario(const std::filesystem::path& path, const Scenario& scenario);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace attentrack::sim

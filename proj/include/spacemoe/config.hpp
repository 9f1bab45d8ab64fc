#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "spacemoe/engine.hpp"

namespace spacemoe {

// Every configurable key with its default value. Loaded documents are merged
// onto this and any key not present here is rejected.
const nlohmann::json& default_config();

// Dotted paths of every leaf in the default document, sorted.
std::vector<std::string> config_paths();

// Path of a config argument: an existing file, or the name of a bundled
// scenario (with or without ".json").
std::string resolve_config_path(const std::string& path_or_name);

// Reads a document, follows "extends" chains, and returns the raw user
// document (not yet merged with defaults). Parse errors carry line/column.
nlohmann::json read_config_file(const std::string& path_or_name);

// Sets `path` to `value`; the path must exist in the default document.
void set_config_value(nlohmann::json& doc, const std::string& path, const nlohmann::json& value);

// "a.b.c=value" where value is JSON if it parses and a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Merges a user document onto the defaults, rejecting unknown keys and type
// mismatches. `require_seed` enforces an explicit workload.seed.
nlohmann::json resolve_config(const nlohmann::json& user, bool require_seed = true);

// Output-only settings that do not influence the simulation.
struct OutputSettings {
  std::string label;
  std::vector<SatelliteId> thermal_sats;  // empty: the workload source
  double thermal_horizon_s = 0.0;         // 0: two periods of the first shell
};

Scenario scenario_from_config(const nlohmann::json& resolved);
OutputSettings output_from_config(const nlohmann::json& resolved);

// FNV-1a 64 over the canonical dump of the resolved document, as 16 hex digits.
std::string config_hash(const nlohmann::json& resolved);

struct LoadedConfig {
  nlohmann::json resolved;
  Scenario scenario;
  OutputSettings output;
  std::string hash;
};

LoadedConfig load_config(const std::string& path_or_name, const std::vector<std::string>& overrides = {});
LoadedConfig load_config_json(const nlohmann::json& user, const std::vector<std::string>& overrides = {});

}  // namespace spacemoe

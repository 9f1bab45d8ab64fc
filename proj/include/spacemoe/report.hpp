#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "spacemoe/engine.hpp"

namespace spacemoe {

// Header line carried by every CSV artifact.
std::string artifact_header(const std::string& config_hash, std::uint64_t seed);

// Writes through a temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string metrics_document(const nlohmann::json& resolved_config, const std::string& config_hash,
                             const RunMetrics& metrics);

std::string summary_csv(const std::vector<RunMetrics>& rows, const std::string& config_hash,
                        std::uint64_t seed, const std::vector<std::string>& extra_columns = {},
                        const std::vector<std::vector<std::string>>& extra_values = {});

std::string energy_ledger_csv(const std::vector<LedgerRow>& rows, const std::string& config_hash,
                              std::uint64_t seed);
std::string thermal_series_csv(const std::vector<ThermalRow>& rows, const std::string& config_hash,
                               std::uint64_t seed);
std::string selection_log_jsonl(const std::vector<SelectionRecord>& rows, const std::string& config_hash,
                                std::uint64_t seed);
std::string transmission_log_jsonl(const std::vector<TransmissionRecord>& rows,
                                   const std::string& config_hash, std::uint64_t seed);
std::string placement_document(const PlacementMap& placement, const std::string& config_hash,
                               std::uint64_t seed);
std::string snapshots_csv(const Scenario& scenario, double horizon_s, const std::string& config_hash,
                          std::uint64_t seed);

// Shortest round-trip decimal form, used for every floating-point CSV cell.
std::string format_number(double v);

}  // namespace spacemoe

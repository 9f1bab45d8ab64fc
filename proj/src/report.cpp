#include "spacemoe/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "spacemoe/error.hpp"

namespace spacemoe {

using nlohmann::json;

namespace {

json header_json(const std::string& config_hash, std::uint64_t seed) {
  return {{"config_hash", config_hash}, {"seed", seed}};
}

json ids_json(const std::vector<SatelliteId>& ids) {
  json out = json::array();
  for (const auto& id : ids) out.push_back(id.str());
  return out;
}

}  // namespace

std::string format_number(double v) {
  // json's serializer already emits the shortest round-trip form
  return json(v).dump();
}

std::string artifact_header(const std::string& config_hash, std::uint64_t seed) {
  return "# config_hash=" + config_hash + " seed=" + std::to_string(seed) + "\n";
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string metrics_document(const json& resolved_config, const std::string& config_hash,
                             const RunMetrics& metrics) {
  json doc = header_json(config_hash, metrics.seed);
  doc["config"] = resolved_config;
  doc["metrics"] = metrics_to_json(metrics);
  return doc.dump(2) + "\n";
}

std::string summary_csv(const std::vector<RunMetrics>& rows, const std::string& config_hash,
                        std::uint64_t seed, const std::vector<std::string>& extra_columns,
                        const std::vector<std::vector<std::string>>& extra_values) {
  std::ostringstream os;
  os << artifact_header(config_hash, seed);
  auto cols = extra_columns;
  for (const auto& c : summary_columns()) cols.push_back(c);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<std::string> cells = r < extra_values.size() ? extra_values[r] : std::vector<std::string>{};
    for (const auto& v : summary_values(rows[r])) cells.push_back(v);
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << "\n";
  }
  return os.str();
}

std::string energy_ledger_csv(const std::vector<LedgerRow>& rows, const std::string& config_hash,
                              std::uint64_t seed) {
  std::ostringstream os;
  os << artifact_header(config_hash, seed) << "t,sat_id,soc,health,harvest_w,discharge_w\n";
  for (const auto& r : rows) {
    os << format_number(r.t) << ',' << r.sat.str() << ',' << format_number(r.soc) << ','
       << format_number(r.health) << ',' << format_number(r.harvest_w) << ',' << format_number(r.discharge_w)
       << '\n';
  }
  return os.str();
}

std::string thermal_series_csv(const std::vector<ThermalRow>& rows, const std::string& config_hash,
                               std::uint64_t seed) {
  std::ostringstream os;
  os << artifact_header(config_hash, seed) << "t,sat_id,p_rad_w,p_abs_w,budget_w\n";
  for (const auto& r : rows) {
    os << format_number(r.t) << ',' << r.sat.str() << ',' << format_number(r.p_rad_w) << ','
       << format_number(r.p_abs_w) << ',' << format_number(r.budget_w) << '\n';
  }
  return os.str();
}

std::string selection_log_jsonl(const std::vector<SelectionRecord>& rows, const std::string& config_hash,
                                std::uint64_t seed) {
  std::ostringstream os;
  os << header_json(config_hash, seed).dump() << '\n';
  for (const auto& r : rows) {
    json j = {{"t", r.t},
              {"layer", r.layer},
              {"gated", r.gated},
              {"executed", r.executed},
              {"hosts", ids_json(r.hosts)},
              {"utility", r.utility}};
    os << j.dump() << '\n';
  }
  return os.str();
}

std::string transmission_log_jsonl(const std::vector<TransmissionRecord>& rows,
                                   const std::string& config_hash, std::uint64_t seed) {
  std::ostringstream os;
  os << header_json(config_hash, seed).dump() << '\n';
  for (const auto& r : rows) {
    json j = {{"t", r.t},
              {"src", r.src.str()},
              {"dst", r.dst.str()},
              {"hops", ids_json(r.hops)},
              {"bytes", r.bytes},
              {"compressed_ratio", r.compression_ratio},
              {"thermal_fallback", r.thermal_fallback}};
    os << j.dump() << '\n';
  }
  return os.str();
}

std::string placement_document(const PlacementMap& placement, const std::string& config_hash,
                               std::uint64_t seed) {
  json doc = header_json(config_hash, seed);
  doc["placement"] = placement_to_json(placement);
  return doc.dump(2) + "\n";
}

std::string snapshots_csv(const Scenario& scenario, double horizon_s, const std::string& config_hash,
                          std::uint64_t seed) {
  std::ostringstream os;
  os << artifact_header(config_hash, seed) << "t,sat_id,x_km,y_km,z_km,sunlit\n";
  const long steps = static_cast<long>(std::floor(horizon_s / scenario.snapshot_interval_s + 1e-9));
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * scenario.snapshot_interval_s;
    write_snapshot_rows(os, snapshot_at(scenario.shells, t, scenario.isl, scenario.sun_direction));
  }
  return os.str();
}

}  // namespace spacemoe

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spacemoe/constellation.hpp"
#include "spacemoe/moe.hpp"
#include "spacemoe/placement.hpp"
#include "spacemoe/power.hpp"
#include "spacemoe/routing.hpp"
#include "spacemoe/selection.hpp"
#include "spacemoe/thermal.hpp"

namespace spacemoe {

struct SourceSpec {
  enum class Mode { Fixed, Ground };
  Mode mode = Mode::Fixed;
  SatelliteId satellite{};
  GroundStation station{};
  double min_elevation_deg = 25.0;
};

struct WorkloadSpec {
  double arrival_rate_hz = 0.5;
  int tokens_per_request = 10;
  double duration_s = 1000.0;
  std::uint64_t seed = 0;
  bool poisson = false;
  int profile_tokens = 2000;
  SourceSpec source{};

  bool operator==(const WorkloadSpec& o) const;
};

enum class PlacementStrategy { Static, MobilityAware, Coactivation, AllOnSource, Given };
enum class Architecture { SpaceMoE, Centralized, Split };

PlacementStrategy parse_placement_strategy(const std::string& name);
std::string to_string(PlacementStrategy s);
Architecture parse_architecture(const std::string& name);
std::string to_string(Architecture a);

struct SplitGroup {
  int first_layer = 0;
  int last_layer = 0;  // inclusive
  SatelliteId host{};
};

struct PlacementConfig {
  PlacementStrategy strategy = PlacementStrategy::MobilityAware;
  CapacityPlan capacity{};
  std::uint64_t replica_budget_bytes = 0;
  double horizon_s = 0.0;  // 0: one orbital period of the first shell
  double sample_interval_s = 60.0;
  Architecture architecture = Architecture::SpaceMoE;
  std::vector<SplitGroup> split{};
  bool split_u_shaped = true;
  std::optional<PlacementMap> given{};
};

enum class RoutingMode { Shortest, ThermalAware };

struct RoutingConfig {
  RoutingMode mode = RoutingMode::Shortest;
  TransmitParams transmit{};
  bool latency_sensitive = true;
};

struct Scenario {
  std::string label = "spacemoe";
  std::vector<WalkerShell> shells{};
  IslPolicy isl{};
  Vec3 sun_direction{1.0, 0.0, 0.0};
  double snapshot_interval_s = 10.0;

  MoEModelSpec model{};
  SkewSpec skew{};
  double similarity_tau = 0.3;

  PowerProfile power{};
  DegradationParams degradation{};
  BatteryState battery{};  // initial state of every satellite
  double compute_flops = 1e13;

  ThermalSpec thermal{};
  PlacementConfig placement{};
  SelectionPolicy selection{};
  RoutingConfig routing{};
  WorkloadSpec workload{};

  void validate() const;
  double reference_period_s() const;
};

struct RunMetrics {
  std::string label;
  std::string architecture;
  std::uint64_t seed = 0;
  std::uint64_t requests = 0;
  std::uint64_t tokens = 0;

  double avg_latency_s = 0.0;
  double p50_latency_s = 0.0;
  double p95_latency_s = 0.0;
  double mean_compute_latency_s = 0.0;
  double mean_comm_latency_s = 0.0;
  std::vector<double> layer_compute_s;  // mean per layer
  std::vector<double> layer_comm_s;

  double total_energy_wh = 0.0;  // inference load only (compute + transmit)
  double compute_energy_wh = 0.0;
  double transmit_energy_wh = 0.0;
  double fleet_degradation = 0.0;
  double min_health = 1.0;

  double mean_utility = 0.0;
  std::uint64_t thermal_violations = 0;
  std::uint64_t no_route_events = 0;
  std::uint64_t brownouts = 0;
  std::uint64_t dropped_experts = 0;
  std::uint64_t substitutions = 0;

  std::uint64_t bytes_moved = 0;
  double bytes_per_token = 0.0;
  double remote_fraction = 0.0;
  double mean_hosts_per_layer = 0.0;
  std::uint64_t source_memory_bytes = 0;
  std::uint64_t replicas = 0;
  double mean_ingress_delay_s = 0.0;
};

// Equality over every measured field; label and architecture are names, not
// measurements, and are ignored.
bool same_measurements(const RunMetrics& a, const RunMetrics& b);

nlohmann::json metrics_to_json(const RunMetrics& m);
std::vector<std::string> summary_columns();
std::vector<std::string> summary_values(const RunMetrics& m);

struct LedgerRow {
  double t = 0.0;  // interval start
  SatelliteId sat{};
  double soc = 0.0;
  double health = 0.0;
  double harvest_w = 0.0;
  double discharge_w = 0.0;
  double inference_w = 0.0;  // average inference load over the interval
  double degradation = 0.0;
  bool brownout = false;
};

struct ThermalRow {
  double t = 0.0;
  SatelliteId sat{};
  double p_rad_w = 0.0;
  double p_abs_w = 0.0;
  double budget_w = 0.0;
};

struct TransmissionRecord {
  double t = 0.0;
  SatelliteId src{};
  SatelliteId dst{};
  std::vector<SatelliteId> hops{};
  std::uint64_t bytes = 0;
  double compression_ratio = 1.0;
  bool thermal_fallback = false;
};

struct SelectionRecord {
  double t = 0.0;
  int layer = 0;
  std::vector<int> gated{};
  std::vector<int> executed{};
  std::vector<SatelliteId> hosts{};
  double utility = 0.0;
};

struct ThermalAudit {
  std::uint64_t checks = 0;
  std::uint64_t over_commits = 0;
};

struct RunOptions {
  bool keep_ledger = false;
  bool keep_logs = false;
};

struct RunResult {
  RunMetrics metrics;
  PlacementMap placement;
  ActivationStats profile;
  std::vector<double> token_latency_s;
  std::vector<LedgerRow> ledger;
  std::vector<TransmissionRecord> transmissions;
  std::vector<SelectionRecord> selections;
  ThermalAudit audit;
};

RunResult simulate(const Scenario& scenario, const RunOptions& options = {});
RunMetrics run(const Scenario& scenario);
RunMetrics run_baseline_centralized(const Scenario& scenario);
RunMetrics run_baseline_split(const Scenario& scenario, const std::vector<SplitGroup>& partition,
                              bool u_shaped = true);

// Throws ParameterError unless the groups are contiguous, disjoint and cover
// every layer.
void validate_partition(const std::vector<SplitGroup>& partition, int num_layers);

struct Comparison {
  std::vector<RunMetrics> rows;
};

Comparison compare(const std::vector<Scenario>& scenarios);

// Budget series for the given satellites (all when empty) at the scenario's
// snapshot interval over [0, horizon_s].
std::vector<ThermalRow> thermal_series(const Scenario& scenario, double horizon_s,
                                       const std::vector<SatelliteId>& sats = {});

// Ground-user ingress: satellite with the highest elevation at time t.
SatelliteId best_visible_satellite(const Scenario& scenario, double t, double* elevation_deg = nullptr);

// Snapshot series used by the placement strategies.
std::vector<TopologySnapshot> placement_series(const Scenario& scenario);

}  // namespace spacemoe

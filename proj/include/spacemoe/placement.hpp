#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <json.hpp>

#include "spacemoe/constellation.hpp"
#include "spacemoe/moe.hpp"

namespace spacemoe {

struct CapacityPlan {
  std::uint64_t default_bytes = 0;
  std::map<SatelliteId, std::uint64_t> overrides;

  std::uint64_t of(const SatelliteId& id) const;
};

struct PlacementMap {
  std::map<ExpertKey, std::vector<SatelliteId>> hosts;  // host lists kept sorted
  std::map<SatelliteId, std::uint64_t> memory_used;

  const std::vector<SatelliteId>& hosts_of(const ExpertKey& k) const;
  bool hosts_expert(const SatelliteId& sat, const ExpertKey& k) const;
  void add(const ExpertKey& k, const SatelliteId& sat, std::uint64_t bytes);
  std::size_t replica_count() const;
  bool operator==(const PlacementMap&) const = default;
};

// Throws PlacementError if an expert is missing, memory accounting is off, or
// a satellite is over capacity.
void validate_placement(const PlacementMap& placement, const MoEModelSpec& spec,
                        const CapacityPlan& capacities);

// Mean round-trip propagation delay from the source to every node, averaged
// over the snapshot series (+inf when a node is unreachable in any snapshot).
std::vector<double> mean_round_trip(const std::vector<TopologySnapshot>& series,
                                    const SatelliteId& source);

// Activation-weighted mean round-trip delay of the first replica of every
// expert; the greedy strategies minimize this.
double placement_objective(const PlacementMap& placement, const ActivationStats& stats,
                           const std::vector<TopologySnapshot>& series, const SatelliteId& source);

PlacementMap place_all_on(const MoEModelSpec& spec, const SatelliteId& sat,
                          const CapacityPlan& capacities);

// One replica per expert, round-robin in satellite id order.
PlacementMap place_static(const MoEModelSpec& spec, std::vector<SatelliteId> sats,
                          const CapacityPlan& capacities);

PlacementMap place_mobility_aware(const MoEModelSpec& spec, const ActivationStats& stats,
                                  const std::vector<TopologySnapshot>& series,
                                  const SatelliteId& source, const CapacityPlan& capacities);

PlacementMap place_coactivation(const MoEModelSpec& spec, const ActivationStats& stats,
                                const std::vector<TopologySnapshot>& series,
                                const SatelliteId& source, const CapacityPlan& capacities);

// Greedy hot-expert replication until the byte budget or capacity runs out.
PlacementMap replicate_hot(const PlacementMap& placement, const MoEModelSpec& spec,
                           const ActivationStats& stats,
                           const std::vector<TopologySnapshot>& series, const SatelliteId& source,
                           const CapacityPlan& capacities, std::uint64_t replica_budget_bytes);

struct TraceToken {
  double t = 0.0;
  std::vector<GatingScores> layers;
};

std::vector<TraceToken> make_trace(const MoEModelSpec& spec, const GatingSampler& sampler,
                                   std::mt19937_64& rng, int tokens, double t0, double spacing_s);

struct PlacementEval {
  double avg_latency_per_token_s = 0.0;
  double p95_latency_s = 0.0;
  double remote_fraction = 0.0;
  std::uint64_t total_bytes_moved = 0;
};

// Replays a trace with Top-K gating and nearest-replica access; latency only.
PlacementEval eval_placement(const PlacementMap& placement, const std::vector<TraceToken>& trace,
                             const std::vector<TopologySnapshot>& series, const MoEModelSpec& spec,
                             const SatelliteId& source, double compute_flops);

// Index of the snapshot in force at time t (series sorted by time).
std::size_t snapshot_index_at(const std::vector<TopologySnapshot>& series, double t);

nlohmann::json placement_to_json(const PlacementMap& placement);
PlacementMap placement_from_json(const nlohmann::json& doc, const MoEModelSpec& spec);

}  // namespace spacemoe

#pragma once

#include <cstdint>
#include <vector>

#include "spacemoe/constellation.hpp"
#include "spacemoe/thermal.hpp"

namespace spacemoe {

struct Route {
  std::vector<SatelliteId> hops;   // src first, dst last
  std::vector<std::size_t> nodes;  // same hops as snapshot indices
  double total_delay_s = 0.0;
  double bottleneck_rate_bps = 0.0;  // +inf for a single-node route
  bool crosses_shell = false;

  std::size_t hop_count() const { return nodes.empty() ? 0 : nodes.size() - 1; }
  // Propagation plus store-and-forward serialization of `bytes` on every hop.
  double transfer_time_s(const TopologySnapshot& topo, std::uint64_t bytes) const;
  Route reversed() const;
};

// Nodes a path may visit; an empty mask allows everything.
using NodeMask = std::vector<bool>;

// Delay-shortest path. Equal-delay paths are broken by the lexicographically
// smallest hop sequence. Throws NoRouteError when dst is unreachable.
Route shortest_path(const TopologySnapshot& topo, const SatelliteId& src, const SatelliteId& dst,
                    const NodeMask& allowed = {});
Route shortest_path(const TopologySnapshot& topo, std::size_t src, std::size_t dst,
                    const NodeMask& allowed = {});

// Shortest propagation delay from src to every node (+inf if unreachable).
std::vector<double> shortest_delays(const TopologySnapshot& topo, std::size_t src,
                                    const NodeMask& allowed = {});

// Shortest path over relays and destination that could still admit
// forward_power_w. The source is exempt. Nothing is committed.
Route thermal_aware_path(const TopologySnapshot& topo, const std::vector<ThermalState>& thermal,
                         std::size_t src, std::size_t dst, double forward_power_w,
                         const NodeMask& allowed = {});

// Global shortest path plus, when different, the best path that stays inside
// the source's shell.
std::vector<Route> candidate_routes(const TopologySnapshot& topo, std::size_t src, std::size_t dst,
                                    const NodeMask& allowed = {});

// Latency-sensitive traffic drops cross-shell routes whenever an intra-shell
// route exists. Result is ordered by (delay, hop count).
std::vector<Route> layer_preference(std::vector<Route> candidates, bool latency_sensitive);

struct TransmitParams {
  bool importance_aware = true;
  double r_min = 0.25;
  double d_max = 0.2;
  double gamma = 1.0;
};

struct TransmitPlan {
  Route route;
  double compression_ratio = 1.0;
  double distortion = 0.0;
  std::uint64_t bytes_on_wire = 0;
};

double compression_ratio_for(double importance, const TransmitParams& params);
double distortion_for(double compression_ratio, const TransmitParams& params);

TransmitPlan plan_transmission(double importance, const std::vector<Route>& candidates,
                               std::uint64_t hidden_bytes, const TransmitParams& params,
                               bool latency_sensitive);

// Structural check of the route invariants against the snapshot.
bool route_is_consistent(const TopologySnapshot& topo, const Route& route);

}  // namespace spacemoe

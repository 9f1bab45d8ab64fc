#pragma once

// Hand-built topologies and an exhaustive path oracle for routing tests.

#include <functional>
#include <optional>
#include <vector>

#include "spacemoe/constellation.hpp"
#include "spacemoe/thermal.hpp"

namespace spacemoe::testing {

struct Edge {
  int a;
  int b;
  double delay;
};

inline TopologySnapshot make_graph(int n, const std::vector<Edge>& edges, double rate_bps = 10e9) {
  TopologySnapshot topo;
  for (int i = 0; i < n; ++i) {
    topo.nodes.push_back(SatelliteId{0, 0, i});
    topo.positions.push_back({7000.0, static_cast<double>(i), 0.0});
    topo.sunlit.push_back(true);
  }
  for (const auto& e : edges) {
    const auto a = static_cast<std::size_t>(std::min(e.a, e.b));
    const auto b = static_cast<std::size_t>(std::max(e.a, e.b));
    topo.links.push_back({a, b, e.delay, rate_bps});
  }
  return topo;
}

inline std::vector<ThermalState> budgets(const std::vector<double>& b) {
  std::vector<ThermalState> out;
  for (double v : b) {
    ThermalState s;
    s.budget_w = v;
    out.push_back(s);
  }
  return out;
}

struct BestPath {
  double delay = 0.0;
  std::vector<std::size_t> nodes;
};

// Enumerates every simple path; keeps the minimum delay and, among paths tied
// within 1e-12 relative, the lexicographically smallest node sequence.
inline std::optional<BestPath> brute_force_best(const TopologySnapshot& topo, std::size_t src, std::size_t dst,
                                                const std::vector<bool>& allowed) {
  const std::size_t n = topo.nodes.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (const auto& l : topo.links) {
    adj[l.a].push_back({l.b, l.propagation_delay_s});
    adj[l.b].push_back({l.a, l.propagation_delay_s});
  }
  std::optional<BestPath> best;
  std::vector<std::size_t> path{src};
  std::vector<bool> on(n, false);
  on[src] = true;
  std::function<void(std::size_t, double)> dfs = [&](std::size_t u, double d) {
    if (u == dst) {
      if (!best) {
        best = BestPath{d, path};
      } else {
        const double tol = 1e-12 * std::max(d, best->delay);
        if (d < best->delay - tol || (std::abs(d - best->delay) <= tol && path < best->nodes)) {
          best = BestPath{std::min(d, best->delay), path};
          best->delay = d;
        }
      }
      return;
    }
    for (const auto& [v, w] : adj[u]) {
      if (on[v] || (!allowed.empty() && !allowed[v])) continue;
      on[v] = true;
      path.push_back(v);
      dfs(v, d + w);
      path.pop_back();
      on[v] = false;
    }
  };
  dfs(src, 0.0);
  return best;
}

}  // namespace spacemoe::testing

#include "spacemoe/routing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "spacemoe/error.hpp"

namespace spacemoe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

bool delays_equal(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

bool allowed_node(const NodeMask& mask, std::size_t i) { return mask.empty() || mask[i]; }

std::vector<std::size_t> trace(const std::vector<std::size_t>& prev, std::size_t v) {
  std::vector<std::size_t> path;
  for (std::size_t cur = v; cur != kNone; cur = prev[cur]) path.push_back(cur);
  std::reverse(path.begin(), path.end());
  return path;
}

bool lex_less(const TopologySnapshot& topo, const std::vector<std::size_t>& a,
              const std::vector<std::size_t>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                      [&](std::size_t x, std::size_t y) {
                                        return topo.nodes[x] < topo.nodes[y];
                                      });
}

struct Labels {
  std::vector<double> dist;
  std::vector<std::size_t> prev;
};

Labels dijkstra(const TopologySnapshot& topo, std::size_t src, const NodeMask& allowed,
                bool lexicographic) {
  const std::size_t n = topo.size();
  Labels lab{std::vector<double>(n, kInf), std::vector<std::size_t>(n, kNone)};
  const auto adj = topo.adjacency();
  std::vector<bool> done(n, false);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  lab.dist[src] = 0.0;
  pq.push({0.0, src});
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (done[u] || d > lab.dist[u]) continue;
    done[u] = true;
    for (const std::size_t li : adj[u]) {
      const Link& l = topo.links[li];
      const std::size_t v = l.a == u ? l.b : l.a;
      if (done[v] || !allowed_node(allowed, v)) continue;
      const double nd = d + l.propagation_delay_s;
      if (lab.dist[v] < kInf && delays_equal(nd, lab.dist[v])) {
        if (lexicographic) {
          // compare whole paths; one predecessor path can be a prefix of the other
          auto via_u = trace(lab.prev, u);
          via_u.push_back(v);
          if (lex_less(topo, via_u, trace(lab.prev, v))) lab.prev[v] = u;
        }
        continue;
      }
      if (nd < lab.dist[v]) {
        lab.dist[v] = nd;
        lab.prev[v] = u;
        pq.push({nd, v});
      }
    }
  }
  return lab;
}

Route make_route(const TopologySnapshot& topo, const std::vector<std::size_t>& path) {
  Route r;
  r.nodes = path;
  r.bottleneck_rate_bps = kInf;
  for (std::size_t i = 0; i < path.size(); ++i) {
    r.hops.push_back(topo.nodes[path[i]]);
    if (i == 0) continue;
    const Link* l = topo.find_link(path[i - 1], path[i]);
    if (l == nullptr) throw ParameterError("route uses a missing link");
    r.total_delay_s += l->propagation_delay_s;
    r.bottleneck_rate_bps = std::min(r.bottleneck_rate_bps, l->data_rate_bps);
    if (topo.nodes[path[i - 1]].shell != topo.nodes[path[i]].shell) r.crosses_shell = true;
  }
  return r;
}

}  // namespace

double Route::transfer_time_s(const TopologySnapshot& topo, std::uint64_t bytes) const {
  double t = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const Link* l = topo.find_link(nodes[i - 1], nodes[i]);
    if (l == nullptr) throw ParameterError("route uses a missing link");
    t += l->propagation_delay_s + 8.0 * static_cast<double>(bytes) / l->data_rate_bps;
  }
  return t;
}

Route Route::reversed() const {
  Route r = *this;
  std::reverse(r.hops.begin(), r.hops.end());
  std::reverse(r.nodes.begin(), r.nodes.end());
  return r;
}

Route shortest_path(const TopologySnapshot& topo, std::size_t src, std::size_t dst,
                    const NodeMask& allowed) {
  if (src >= topo.size() || dst >= topo.size()) throw ParameterError("route endpoint not in snapshot");
  if (src == dst) return make_route(topo, {src});
  if (!allowed_node(allowed, dst)) {
    throw NoRouteError("no route from " + topo.nodes[src].str() + " to " + topo.nodes[dst].str());
  }
  const auto lab = dijkstra(topo, src, allowed, true);
  if (lab.dist[dst] == kInf) {
    throw NoRouteError("no route from " + topo.nodes[src].str() + " to " + topo.nodes[dst].str());
  }
  return make_route(topo, trace(lab.prev, dst));
}

Route shortest_path(const TopologySnapshot& topo, const SatelliteId& src, const SatelliteId& dst,
                    const NodeMask& allowed) {
  return shortest_path(topo, topo.index_of(src), topo.index_of(dst), allowed);
}

std::vector<double> shortest_delays(const TopologySnapshot& topo, std::size_t src,
                                    const NodeMask& allowed) {
  return dijkstra(topo, src, allowed, false).dist;
}

Route thermal_aware_path(const TopologySnapshot& topo, const std::vector<ThermalState>& thermal,
                         std::size_t src, std::size_t dst, double forward_power_w,
                         const NodeMask& allowed) {
  if (forward_power_w < 0.0) throw ParameterError("forwarding power must be >= 0");
  if (thermal.size() != topo.size()) throw ParameterError("thermal state count != node count");
  NodeMask mask(topo.size(), false);
  for (std::size_t i = 0; i < topo.size(); ++i) {
    mask[i] = allowed_node(allowed, i) && (i == src || thermal[i].would_admit(forward_power_w));
  }
  try {
    return shortest_path(topo, src, dst, mask);
  } catch (const NoRouteError&) {
    throw ThermalInfeasibleError("no thermally feasible route from " + topo.nodes[src].str() +
                                 " to " + topo.nodes[dst].str());
  }
}

std::vector<Route> candidate_routes(const TopologySnapshot& topo, std::size_t src, std::size_t dst,
                                    const NodeMask& allowed) {
  std::vector<Route> out;
  out.push_back(shortest_path(topo, src, dst, allowed));
  if (!out.front().crosses_shell) return out;
  if (topo.nodes[src].shell != topo.nodes[dst].shell) return out;
  NodeMask intra(topo.size(), false);
  for (std::size_t i = 0; i < topo.size(); ++i) {
    intra[i] = allowed_node(allowed, i) && topo.nodes[i].shell == topo.nodes[src].shell;
  }
  try {
    out.push_back(shortest_path(topo, src, dst, intra));
  } catch (const NoRouteError&) {
  }
  return out;
}

std::vector<Route> layer_preference(std::vector<Route> candidates, bool latency_sensitive) {
  if (candidates.empty()) throw ParameterError("layer preference needs at least one route");
  if (latency_sensitive) {
    const bool has_intra = std::any_of(candidates.begin(), candidates.end(),
                                       [](const Route& r) { return !r.crosses_shell; });
    if (has_intra) {
      std::erase_if(candidates, [](const Route& r) { return r.crosses_shell; });
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Route& a, const Route& b) {
    if (a.total_delay_s != b.total_delay_s) return a.total_delay_s < b.total_delay_s;
    return a.hop_count() < b.hop_count();
  });
  return candidates;
}

double compression_ratio_for(double importance, const TransmitParams& params) {
  if (importance < 0.0 || importance > 1.0) throw ParameterError("importance must lie in [0, 1]");
  if (!params.importance_aware) return 1.0;
  return params.r_min + (1.0 - params.r_min) * importance;
}

double distortion_for(double compression_ratio, const TransmitParams& params) {
  return params.d_max * std::pow(1.0 - compression_ratio, params.gamma);
}

TransmitPlan plan_transmission(double importance, const std::vector<Route>& candidates,
                               std::uint64_t hidden_bytes, const TransmitParams& params,
                               bool latency_sensitive) {
  const auto ranked = layer_preference(candidates, latency_sensitive);
  TransmitPlan plan;
  plan.route = ranked.front();
  plan.compression_ratio = compression_ratio_for(importance, params);
  plan.distortion = distortion_for(plan.compression_ratio, params);
  plan.bytes_on_wire =
      static_cast<std::uint64_t>(std::ceil(static_cast<double>(hidden_bytes) * plan.compression_ratio));
  return plan;
}

bool route_is_consistent(const TopologySnapshot& topo, const Route& route) {
  if (route.nodes.empty() || route.nodes.size() != route.hops.size()) return false;
  double delay = 0.0;
  double rate = kInf;
  for (std::size_t i = 0; i < route.nodes.size(); ++i) {
    if (topo.nodes[route.nodes[i]] != route.hops[i]) return false;
    if (i == 0) continue;
    const Link* l = topo.find_link(route.nodes[i - 1], route.nodes[i]);
    if (l == nullptr) return false;
    delay += l->propagation_delay_s;
    rate = std::min(rate, l->data_rate_bps);
  }
  return delays_equal(delay, route.total_delay_s) && rate == route.bottleneck_rate_bps;
}

}  // namespace spacemoe

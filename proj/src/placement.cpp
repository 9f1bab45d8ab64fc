#include "spacemoe/placement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "spacemoe/error.hpp"
#include "spacemoe/routing.hpp"

namespace spacemoe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string key_str(const ExpertKey& k) {
  return std::to_string(k.layer) + "." + std::to_string(k.expert);
}

std::vector<ExpertKey> all_experts(const MoEModelSpec& spec) {
  std::vector<ExpertKey> keys;
  for (int l = 0; l < spec.num_layers; ++l) {
    for (int e = 0; e < spec.experts_per_layer; ++e) keys.push_back({l, e});
  }
  return keys;
}

void check_series(const std::vector<TopologySnapshot>& series, const SatelliteId& source) {
  if (series.empty()) throw ParameterError("placement needs a non-empty snapshot series");
  for (const auto& s : series) {
    if (s.nodes != series.front().nodes) throw ParameterError("snapshots disagree on node set");
  }
  if (!series.front().contains(source)) throw ParameterError("source " + source.str() + " not in snapshots");
}

void check_stats(const MoEModelSpec& spec, const ActivationStats& stats) {
  if (stats.num_layers != spec.num_layers || stats.experts_per_layer != spec.experts_per_layer) {
    throw ParameterError("activation stats do not match the model shape");
  }
  if (stats.total() == 0) throw ParameterError("activation stats are empty");
}

// Free memory per node, tracked alongside a placement under construction.
struct Ledger {
  const TopologySnapshot& topo;
  const CapacityPlan& caps;
  std::vector<std::uint64_t> used;

  Ledger(const TopologySnapshot& t, const CapacityPlan& c) : topo(t), caps(c), used(t.size(), 0) {}
  std::uint64_t free(std::size_t i) const {
    const auto cap = caps.of(topo.nodes[i]);
    return cap > used[i] ? cap - used[i] : 0;
  }
};

// Nodes ordered by (mean round trip, id); unreachable nodes last.
std::vector<std::size_t> nodes_by_access(const TopologySnapshot& topo, const std::vector<double>& rtt) {
  std::vector<std::size_t> order(topo.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rtt[a] != rtt[b]) return rtt[a] < rtt[b];
    return topo.nodes[a] < topo.nodes[b];
  });
  return order;
}

std::vector<ExpertKey> experts_by_heat(const MoEModelSpec& spec, const ActivationStats& stats) {
  auto keys = all_experts(spec);
  std::stable_sort(keys.begin(), keys.end(), [&](const ExpertKey& a, const ExpertKey& b) {
    return stats.activation_count[a.layer][a.expert] > stats.activation_count[b.layer][b.expert];
  });
  return keys;
}

[[noreturn]] void unplaceable(const ExpertKey& k) {
  throw PlacementError("no satellite has room for expert " + key_str(k));
}

void place_greedy(PlacementMap& out, Ledger& ledger, const std::vector<std::size_t>& order,
                  const ExpertKey& k, std::uint64_t bytes) {
  for (const std::size_t i : order) {
    if (ledger.free(i) >= bytes) {
      ledger.used[i] += bytes;
      out.add(k, ledger.topo.nodes[i], bytes);
      return;
    }
  }
  unplaceable(k);
}

}  // namespace

std::uint64_t CapacityPlan::of(const SatelliteId& id) const {
  const auto it = overrides.find(id);
  return it == overrides.end() ? default_bytes : it->second;
}

const std::vector<SatelliteId>& PlacementMap::hosts_of(const ExpertKey& k) const {
  const auto it = hosts.find(k);
  if (it == hosts.end() || it->second.empty()) throw PlacementError("expert " + key_str(k) + " has no host");
  return it->second;
}

bool PlacementMap::hosts_expert(const SatelliteId& sat, const ExpertKey& k) const {
  const auto it = hosts.find(k);
  if (it == hosts.end()) return false;
  return std::binary_search(it->second.begin(), it->second.end(), sat);
}

void PlacementMap::add(const ExpertKey& k, const SatelliteId& sat, std::uint64_t bytes) {
  auto& h = hosts[k];
  const auto pos = std::lower_bound(h.begin(), h.end(), sat);
  if (pos != h.end() && *pos == sat) throw PlacementError("duplicate replica of " + key_str(k) + " on " + sat.str());
  h.insert(pos, sat);
  memory_used[sat] += bytes;
}

std::size_t PlacementMap::replica_count() const {
  std::size_t n = 0;
  for (const auto& [k, h] : hosts) n += h.size();
  return n;
}

void validate_placement(const PlacementMap& placement, const MoEModelSpec& spec,
                        const CapacityPlan& capacities) {
  std::map<SatelliteId, std::uint64_t> recomputed;
  for (const auto& k : all_experts(spec)) {
    for (const auto& s : placement.hosts_of(k)) recomputed[s] += spec.expert_memory_bytes;
  }
  for (const auto& [k, h] : placement.hosts) {
    if (k.layer < 0 || k.layer >= spec.num_layers || k.expert < 0 || k.expert >= spec.experts_per_layer) {
      throw PlacementError("placement lists expert " + key_str(k) + " outside the model");
    }
  }
  for (const auto& [sat, used] : placement.memory_used) {
    const auto it = recomputed.find(sat);
    const std::uint64_t expect = it == recomputed.end() ? 0 : it->second;
    if (used != expect) throw PlacementError("memory accounting mismatch on " + sat.str());
  }
  for (const auto& [sat, used] : recomputed) {
    const auto it = placement.memory_used.find(sat);
    if (it == placement.memory_used.end() || it->second != used) {
      throw PlacementError("memory accounting mismatch on " + sat.str());
    }
    if (used > capacities.of(sat)) throw PlacementError("satellite " + sat.str() + " over capacity");
  }
}

std::vector<double> mean_round_trip(const std::vector<TopologySnapshot>& series,
                                    const SatelliteId& source) {
  check_series(series, source);
  const std::size_t src = series.front().index_of(source);
  std::vector<double> acc(series.front().size(), 0.0);
  for (const auto& snap : series) {
    const auto d = shortest_delays(snap, src);
    for (std::size_t i = 0; i < d.size(); ++i) acc[i] += d[i];
  }
  for (auto& v : acc) v = 2.0 * v / static_cast<double>(series.size());
  return acc;
}

double placement_objective(const PlacementMap& placement, const ActivationStats& stats,
                           const std::vector<TopologySnapshot>& series, const SatelliteId& source) {
  const auto rtt = mean_round_trip(series, source);
  const auto& topo = series.front();
  double num = 0.0, den = 0.0;
  for (const auto& [k, hosts] : placement.hosts) {
    const double w = static_cast<double>(stats.activation_count[k.layer][k.expert]);
    double best = kInf;
    for (const auto& h : hosts) best = std::min(best, rtt[topo.index_of(h)]);
    num += w * best;
    den += w;
  }
  return den > 0.0 ? num / den : 0.0;
}

PlacementMap place_all_on(const MoEModelSpec& spec, const SatelliteId& sat,
                          const CapacityPlan& capacities) {
  if (spec.total_expert_memory_bytes() > capacities.of(sat)) {
    throw PlacementError("experts need " + std::to_string(spec.total_expert_memory_bytes()) +
                         " bytes but " + sat.str() + " holds " + std::to_string(capacities.of(sat)));
  }
  PlacementMap out;
  for (const auto& k : all_experts(spec)) out.add(k, sat, spec.expert_memory_bytes);
  return out;
}

PlacementMap place_static(const MoEModelSpec& spec, std::vector<SatelliteId> sats,
                          const CapacityPlan& capacities) {
  spec.validate();
  if (sats.empty()) throw PlacementError("no satellites to place on");
  std::sort(sats.begin(), sats.end());
  std::vector<std::uint64_t> used(sats.size(), 0);
  const auto bytes = spec.expert_memory_bytes;
  PlacementMap out;
  std::size_t cursor = 0;
  for (const auto& k : all_experts(spec)) {
    bool placed = false;
    for (std::size_t step = 0; step < sats.size(); ++step) {
      const std::size_t i = (cursor + step) % sats.size();
      if (capacities.of(sats[i]) >= used[i] + bytes) {
        used[i] += bytes;
        out.add(k, sats[i], bytes);
        cursor = (i + 1) % sats.size();
        placed = true;
        break;
      }
    }
    if (!placed) unplaceable(k);
  }
  return out;
}

PlacementMap place_mobility_aware(const MoEModelSpec& spec, const ActivationStats& stats,
                                  const std::vector<TopologySnapshot>& series,
                                  const SatelliteId& source, const CapacityPlan& capacities) {
  spec.validate();
  check_stats(spec, stats);
  const auto rtt = mean_round_trip(series, source);
  const auto& topo = series.front();
  const auto order = nodes_by_access(topo, rtt);
  Ledger ledger(topo, capacities);
  PlacementMap out;
  for (const auto& k : experts_by_heat(spec, stats)) {
    place_greedy(out, ledger, order, k, spec.expert_memory_bytes);
  }
  return out;
}

PlacementMap place_coactivation(const MoEModelSpec& spec, const ActivationStats& stats,
                                const std::vector<TopologySnapshot>& series,
                                const SatelliteId& source, const CapacityPlan& capacities) {
  spec.validate();
  check_stats(spec, stats);
  const auto rtt = mean_round_trip(series, source);
  const auto& topo = series.front();
  const auto order = nodes_by_access(topo, rtt);
  const int L = spec.num_layers, E = spec.experts_per_layer;
  const auto bytes = spec.expert_memory_bytes;

  std::uint64_t largest = 0;
  for (const auto& n : topo.nodes) largest = std::max(largest, capacities.of(n));
  const std::uint64_t max_members = bytes == 0 ? static_cast<std::uint64_t>(E) : largest / bytes;

  // Union-find over flat (layer, expert) ids.
  std::vector<int> parent(static_cast<std::size_t>(L * E));
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<std::uint64_t> size(parent.size(), 1);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  struct Pair {
    std::uint64_t count;
    int layer, i, j;
  };
  std::vector<Pair> pairs;
  for (int l = 0; l < L; ++l) {
    for (int i = 0; i < E; ++i) {
      for (int j = i + 1; j < E; ++j) {
        const auto c = stats.coactivation_count[l][i][j];
        if (c > 0) pairs.push_back({c, l, i, j});
      }
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.count > b.count; });
  for (const auto& p : pairs) {
    const int a = find(p.layer * E + p.i), b = find(p.layer * E + p.j);
    if (a == b || size[a] + size[b] > max_members) continue;
    const int root = std::min(a, b), child = std::max(a, b);
    parent[child] = root;
    size[root] += size[child];
  }

  struct Group {
    std::uint64_t weight = 0;
    std::vector<ExpertKey> members;
  };
  std::map<int, Group> groups;
  for (int l = 0; l < L; ++l) {
    for (int e = 0; e < E; ++e) {
      auto& g = groups[find(l * E + e)];
      g.weight += stats.activation_count[l][e];
      g.members.push_back({l, e});
    }
  }
  std::vector<Group> ordered;
  for (auto& [root, g] : groups) {
    std::stable_sort(g.members.begin(), g.members.end(), [&](const ExpertKey& a, const ExpertKey& b) {
      return stats.activation_count[a.layer][a.expert] > stats.activation_count[b.layer][b.expert];
    });
    ordered.push_back(std::move(g));
  }
  // Ties resolve by the hottest member's key, matching the single-expert order.
  std::stable_sort(ordered.begin(), ordered.end(), [](const Group& a, const Group& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.members.front() < b.members.front();
  });

  Ledger ledger(topo, capacities);
  PlacementMap out;
  for (const auto& g : ordered) {
    const std::uint64_t need = bytes * g.members.size();
    bool placed = false;
    for (const std::size_t i : order) {
      if (ledger.free(i) >= need) {
        ledger.used[i] += need;
        for (const auto& k : g.members) out.add(k, topo.nodes[i], bytes);
        placed = true;
        break;
      }
    }
    if (!placed) {
      for (const auto& k : g.members) place_greedy(out, ledger, order, k, bytes);
    }
  }
  return out;
}

PlacementMap replicate_hot(const PlacementMap& placement, const MoEModelSpec& spec,
                           const ActivationStats& stats,
                           const std::vector<TopologySnapshot>& series, const SatelliteId& source,
                           const CapacityPlan& capacities, std::uint64_t replica_budget_bytes) {
  PlacementMap out = placement;
  const auto bytes = spec.expert_memory_bytes;
  if (replica_budget_bytes == 0 || bytes == 0 || replica_budget_bytes < bytes) return out;
  check_stats(spec, stats);
  check_series(series, source);
  const auto& topo = series.front();
  const std::size_t src = topo.index_of(source);
  const std::size_t n = topo.size();

  // Round trip per snapshot per node.
  std::vector<std::vector<double>> rtt;
  rtt.reserve(series.size());
  for (const auto& snap : series) {
    auto d = shortest_delays(snap, src);
    for (auto& v : d) v *= 2.0;
    rtt.push_back(std::move(d));
  }
  auto access = [&](const std::vector<std::size_t>& replicas, std::size_t extra) {
    double sum = 0.0;
    for (const auto& r : rtt) {
      double best = extra < n ? r[extra] : kInf;
      for (const auto i : replicas) best = std::min(best, r[i]);
      sum += best;
    }
    return sum / static_cast<double>(rtt.size());
  };

  std::vector<std::uint64_t> used(n, 0);
  for (const auto& [sat, u] : out.memory_used) {
    if (topo.contains(sat)) used[topo.index_of(sat)] = u;
  }
  std::set<ExpertKey> exhausted;
  std::uint64_t budget = replica_budget_bytes;

  while (budget >= bytes) {
    ExpertKey best_key{};
    double best_score = 0.0;
    bool found = false;
    for (const auto& [k, hosts] : out.hosts) {
      if (exhausted.count(k)) continue;
      std::vector<std::size_t> idx;
      for (const auto& h : hosts) idx.push_back(topo.index_of(h));
      const double score = stats.frequency(k.layer, k.expert) * access(idx, n);
      if (score > best_score) {
        best_score = score;
        best_key = k;
        found = true;
      }
    }
    if (!found) break;

    std::vector<std::size_t> idx;
    for (const auto& h : out.hosts_of(best_key)) idx.push_back(topo.index_of(h));
    const double current = access(idx, n);
    std::size_t best_node = n;
    double best_latency = current;
    for (std::size_t i = 0; i < n; ++i) {
      const auto cap = capacities.of(topo.nodes[i]);
      if (cap < used[i] + bytes) continue;
      if (std::find(idx.begin(), idx.end(), i) != idx.end()) continue;
      const double lat = access(idx, i);
      if (lat < best_latency) {
        best_latency = lat;
        best_node = i;
      }
    }
    if (best_node == n) {
      exhausted.insert(best_key);
      continue;
    }
    out.add(best_key, topo.nodes[best_node], bytes);
    used[best_node] += bytes;
    budget -= bytes;
  }
  return out;
}

std::vector<TraceToken> make_trace(const MoEModelSpec& spec, const GatingSampler& sampler,
                                   std::mt19937_64& rng, int tokens, double t0, double spacing_s) {
  std::vector<TraceToken> trace;
  trace.reserve(static_cast<std::size_t>(tokens));
  for (int i = 0; i < tokens; ++i) {
    TraceToken tok;
    tok.t = t0 + spacing_s * i;
    for (int l = 0; l < spec.num_layers; ++l) tok.layers.push_back(sampler.sample(rng, l));
    trace.push_back(std::move(tok));
  }
  return trace;
}

std::size_t snapshot_index_at(const std::vector<TopologySnapshot>& series, double t) {
  if (series.empty()) throw ParameterError("empty snapshot series");
  const auto it = std::upper_bound(series.begin(), series.end(), t,
                                   [](double v, const TopologySnapshot& s) { return v < s.t; });
  if (it == series.begin()) return 0;
  return static_cast<std::size_t>(it - series.begin()) - 1;
}

PlacementEval eval_placement(const PlacementMap& placement, const std::vector<TraceToken>& trace,
                             const std::vector<TopologySnapshot>& series, const MoEModelSpec& spec,
                             const SatelliteId& source, double compute_flops) {
  check_series(series, source);
  if (!(compute_flops > 0.0)) throw ParameterError("compute rate must be positive");
  const auto& topo0 = series.front();
  const std::size_t src = topo0.index_of(source);
  const auto hidden = hidden_state_bytes(spec);
  const double tau_expert = spec.expert_flops / compute_flops;
  const double tau_dense = spec.non_expert_flops / compute_flops;

  std::map<std::size_t, std::vector<double>> delays;                     // per snapshot
  std::map<std::pair<std::size_t, std::size_t>, double> round_trip;  // (snapshot, host)

  PlacementEval ev;
  std::vector<double> per_token;
  per_token.reserve(trace.size());
  std::uint64_t executions = 0, remote = 0;
  for (const auto& tok : trace) {
    const std::size_t si = snapshot_index_at(series, tok.t);
    const auto& snap = series[si];
    auto dit = delays.find(si);
    if (dit == delays.end()) dit = delays.emplace(si, shortest_delays(snap, src)).first;
    const auto& dist = dit->second;

    double token_latency = 0.0;
    for (const auto& g : tok.layers) {
      std::map<std::size_t, int> per_host;
      for (const auto& choice : gate_topk(g, spec.top_k)) {
        std::size_t host = snap.size();
        for (const auto& h : placement.hosts_of({g.layer, choice.expert})) {
          const auto i = snap.index_of(h);
          if (host == snap.size() || dist[i] < dist[host]) host = i;
        }
        ++per_host[host];
        ++executions;
        if (host != src) {
          ++remote;
          ev.total_bytes_moved += 2 * hidden;
        }
      }
      double slowest = 0.0;
      for (const auto& [host, count] : per_host) {
        double comm = 0.0;
        if (host != src) {
          auto rit = round_trip.find({si, host});
          if (rit == round_trip.end()) {
            const double one_way = shortest_path(snap, src, host).transfer_time_s(snap, hidden);
            rit = round_trip.emplace(std::make_pair(si, host), 2.0 * one_way).first;
          }
          comm = rit->second;
        }
        slowest = std::max(slowest, comm + count * tau_expert);
      }
      token_latency += tau_dense + slowest;
    }
    per_token.push_back(token_latency);
  }
  if (!per_token.empty()) {
    ev.avg_latency_per_token_s =
        std::accumulate(per_token.begin(), per_token.end(), 0.0) / static_cast<double>(per_token.size());
    std::sort(per_token.begin(), per_token.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(per_token.size())));
    ev.p95_latency_s = per_token[std::max<std::size_t>(rank, 1) - 1];
  }
  ev.remote_fraction = executions == 0 ? 0.0 : static_cast<double>(remote) / static_cast<double>(executions);
  return ev;
}

nlohmann::json placement_to_json(const PlacementMap& placement) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [k, hosts] : placement.hosts) {
    auto& arr = doc[key_str(k)] = nlohmann::json::array();
    for (const auto& h : hosts) arr.push_back(h.str());
  }
  return doc;
}

PlacementMap placement_from_json(const nlohmann::json& doc, const MoEModelSpec& spec) {
  if (!doc.is_object()) throw ParameterError("placement document must be an object");
  PlacementMap out;
  for (const auto& [key, hosts] : doc.items()) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) throw ParameterError("placement key '" + key + "' is not layer.expert");
    ExpertKey k{std::stoi(key.substr(0, dot)), std::stoi(key.substr(dot + 1))};
    if (k.layer < 0 || k.layer >= spec.num_layers || k.expert < 0 || k.expert >= spec.experts_per_layer) {
      throw ParameterError("placement key '" + key + "' outside the model");
    }
    if (!hosts.is_array() || hosts.empty()) throw ParameterError("placement key '" + key + "' has no hosts");
    for (const auto& h : hosts) out.add(k, SatelliteId::parse(h.get<std::string>()), spec.expert_memory_bytes);
  }
  return out;
}

}  // namespace spacemoe

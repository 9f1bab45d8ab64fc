#include "spacemoe/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "spacemoe/error.hpp"

namespace spacemoe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double nearest_rank(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

std::uint64_t group_layers(const SplitGroup& g) {
  return static_cast<std::uint64_t>(g.last_layer - g.first_layer + 1);
}

struct Branch {
  std::size_t host = 0;
  std::vector<std::size_t> members;  // indices into outcome.executed
  double comm_s = 0.0;
  double compute_s = 0.0;
  double distortion = 0.0;
};

class Simulation {
 public:
  Simulation(const Scenario& sc, const RunOptions& opt) : sc_(sc), opt_(opt) {}

  RunResult run();

 private:
  struct Request {
    double arrival = 0.0;
    std::size_t source = 0;
    double ingress_delay_s = 0.0;
    int next_token = 0;
  };

  const TopologySnapshot& snapshot(long k);
  void open_interval(long k);
  void close_interval();
  void advance_to(double t);
  const std::vector<double>& delays_from(std::size_t src);
  NodeMask availability(std::size_t src) const;
  void book(std::size_t node, double joules, bool is_compute);

  void build_placement(std::size_t placement_source);
  void generate_workload();
  double process_spacemoe(Request& rq, int token, double t);
  double process_split(Request& rq, int token, double t);
  Route route_to(const TopologySnapshot& snap, std::size_t src, std::size_t dst, double power_w,
                 bool& fallback);
  void transmit(const TopologySnapshot& snap, const Route& route, std::uint64_t bytes, double t,
                double ratio, bool fallback);
  void finalize_metrics();

  const Scenario& sc_;
  RunOptions opt_;
  RunResult res_;

  double dt_ = 10.0;
  std::map<long, TopologySnapshot> snaps_;
  std::vector<SatelliteId> nodes_;
  std::vector<double> view_factor_;
  std::vector<BatteryState> battery_;
  std::vector<ThermalState> thermal_;
  std::vector<double> energy_j_;
  std::vector<double> pending_w_;
  std::vector<bool> unavailable_;
  long interval_ = -1;
  std::map<std::size_t, std::vector<double>> delay_cache_;

  std::optional<GatingSampler> sampler_;
  ExpertSimilarity similarity_;
  std::vector<Request> requests_;
  std::vector<std::vector<std::vector<GatingScores>>> trace_;  // [request][token][layer]
  std::uint64_t hidden_bytes_ = 0;
  double tau_expert_ = 0.0;
  double tau_dense_ = 0.0;
  double expert_j_ = 0.0;
  double dense_j_ = 0.0;
  std::set<std::size_t> source_groups_layers_;

  // accumulators
  std::vector<double> token_compute_;
  std::vector<double> token_comm_;
  std::vector<double> token_utility_;
  std::vector<double> layer_compute_sum_;
  std::vector<double> layer_comm_sum_;
  double compute_j_ = 0.0;
  double transmit_j_ = 0.0;
  std::uint64_t executed_ = 0;
  std::uint64_t remote_ = 0;
  std::uint64_t layer_events_ = 0;
  std::uint64_t host_sum_ = 0;
  double ingress_sum_ = 0.0;
};

const TopologySnapshot& Simulation::snapshot(long k) {
  auto it = snaps_.find(k);
  if (it == snaps_.end()) {
    it = snaps_.emplace(k, snapshot_at(sc_.shells, static_cast<double>(k) * dt_, sc_.isl, sc_.sun_direction))
             .first;
  }
  return it->second;
}

void Simulation::open_interval(long k) {
  // Only the current and next interval are ever needed again.
  while (!snaps_.empty() && snaps_.begin()->first < k) snaps_.erase(snaps_.begin());
  interval_ = k;
  const auto& snap = snapshot(k);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    thermal_[i] = thermal_budget(sc_.thermal, snap.sunlit[i], view_factor_[i]);
  }
  std::fill(energy_j_.begin(), energy_j_.end(), 0.0);
  std::fill(pending_w_.begin(), pending_w_.end(), 0.0);
  delay_cache_.clear();
}

void Simulation::close_interval() {
  const auto& snap = snapshot(interval_);
  const double t0 = static_cast<double>(interval_) * dt_;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    ++res_.audit.checks;
    if (thermal_[i].committed_w > std::max(thermal_[i].budget_w, 0.0)) ++res_.audit.over_commits;

    const double load_w = energy_j_[i] / dt_;
    const auto step = step_energy_clamped(battery_[i], sc_.power, snap.sunlit[i], load_w, dt_, sc_.degradation);
    battery_[i] = step.state;
    unavailable_[i] = step.ledger.brownout;
    if (step.ledger.brownout) ++res_.metrics.brownouts;
    if (opt_.keep_ledger) {
      res_.ledger.push_back({t0, nodes_[i], step.state.soc, step.state.health, step.ledger.harvest_w,
                             step.ledger.discharge_w, load_w, step.ledger.degradation, step.ledger.brownout});
    }
  }
}

void Simulation::advance_to(double t) {
  const long k = static_cast<long>(std::floor(t / dt_));
  if (interval_ < 0) open_interval(0);
  while (interval_ < k) {
    close_interval();
    open_interval(interval_ + 1);
  }
}

NodeMask Simulation::availability(std::size_t src) const {
  NodeMask mask(nodes_.size(), true);
  for (std::size_t i = 0; i < nodes_.size(); ++i) mask[i] = !unavailable_[i] || i == src;
  return mask;
}

const std::vector<double>& Simulation::delays_from(std::size_t src) {
  auto it = delay_cache_.find(src);
  if (it == delay_cache_.end()) {
    it = delay_cache_.emplace(src, shortest_delays(snapshot(interval_), src, availability(src))).first;
  }
  return it->second;
}

void Simulation::book(std::size_t node, double joules, bool is_compute) {
  if (joules <= 0.0) return;
  energy_j_[node] += joules;
  const double watts = joules / dt_;
  pending_w_[node] += watts;
  (is_compute ? compute_j_ : transmit_j_) += joules;
  if (!thermal_[node].admit(watts)) ++res_.metrics.thermal_violations;
}

void Simulation::build_placement(std::size_t placement_source) {
  const auto& pc = sc_.placement;
  const SatelliteId src = nodes_[placement_source];
  const auto& spec = sc_.model;

  if (pc.architecture == Architecture::Centralized) {
    const auto need = spec.total_memory_bytes();
    if (need > pc.capacity.of(src)) {
      throw MemoryInfeasibleError("centralized model needs " + std::to_string(need) + " bytes but " +
                                  src.str() + " holds " + std::to_string(pc.capacity.of(src)));
    }
    res_.placement = place_all_on(spec, src, pc.capacity);
    return;
  }
  if (pc.architecture == Architecture::Split) {
    validate_partition(pc.split, spec.num_layers);
    std::map<SatelliteId, std::uint64_t> need;
    for (const auto& g : pc.split) {
      need[g.host] += group_layers(g) * (spec.total_expert_memory_bytes() / spec.num_layers) +
                      spec.non_expert_memory_bytes * group_layers(g) / spec.num_layers;
    }
    for (const auto& [sat, bytes] : need) {
      if (bytes > pc.capacity.of(sat)) {
        throw MemoryInfeasibleError("split group on " + sat.str() + " needs " + std::to_string(bytes) +
                                    " bytes, capacity " + std::to_string(pc.capacity.of(sat)));
      }
    }
    for (const auto& g : pc.split) {
      for (int l = g.first_layer; l <= g.last_layer; ++l) {
        for (int e = 0; e < spec.experts_per_layer; ++e) res_.placement.add({l, e}, g.host, spec.expert_memory_bytes);
      }
    }
    return;
  }

  switch (pc.strategy) {
    case PlacementStrategy::Static:
      res_.placement = place_static(spec, nodes_, pc.capacity);
      break;
    case PlacementStrategy::MobilityAware:
      res_.placement = place_mobility_aware(spec, res_.profile, placement_series(sc_), src, pc.capacity);
      break;
    case PlacementStrategy::Coactivation:
      res_.placement = place_coactivation(spec, res_.profile, placement_series(sc_), src, pc.capacity);
      break;
    case PlacementStrategy::AllOnSource:
      res_.placement = place_all_on(spec, src, pc.capacity);
      break;
    case PlacementStrategy::Given:
      if (!pc.given) throw ConfigError("placement strategy 'given' needs a placement map");
      res_.placement = *pc.given;
      break;
  }
  if (pc.replica_budget_bytes > 0) {
    res_.placement = replicate_hot(res_.placement, spec, res_.profile, placement_series(sc_), src,
                                   pc.capacity, pc.replica_budget_bytes);
  }
  validate_placement(res_.placement, spec, pc.capacity);
}

void Simulation::generate_workload() {
  const auto& w = sc_.workload;
  auto arrivals = make_stream(w.seed, 2);
  std::exponential_distribution<double> gap(w.arrival_rate_hz);
  double t = 0.0;
  std::vector<double> times;
  while (true) {
    if (w.poisson) {
      t += gap(arrivals);
      if (t >= w.duration_s) break;
      times.push_back(t);
    } else {
      const double at = static_cast<double>(times.size()) / w.arrival_rate_hz;
      if (at >= w.duration_s) break;
      times.push_back(at);
    }
  }

  auto gate_rng = make_stream(w.seed, 3);
  for (const double at : times) {
    Request rq;
    rq.arrival = at;
    if (w.source.mode == SourceSpec::Mode::Fixed) {
      rq.source = std::find(nodes_.begin(), nodes_.end(), w.source.satellite) - nodes_.begin();
    } else {
      double elev = 0.0;
      const auto sat = best_visible_satellite(sc_, at, &elev);
      rq.source = std::find(nodes_.begin(), nodes_.end(), sat) - nodes_.begin();
      std::size_t idx = 0;
      for (const auto& shell : sc_.shells) {
        for (const auto& sp : propagate(shell, at)) {
          if (sp.id == sat) {
            const double lat = w.source.station.lat_deg * std::numbers::pi / 180.0;
            const double lon = w.source.station.lon_deg * std::numbers::pi / 180.0;
            const Vec3 g{kEarthRadiusKm * std::cos(lat) * std::cos(lon), kEarthRadiusKm * std::cos(lat) * std::sin(lon),
                         kEarthRadiusKm * std::sin(lat)};
            rq.ingress_delay_s = 2.0 * distance(g, sp.pos.vec()) / kLightSpeedKmS;
          }
          ++idx;
        }
      }
    }
    std::vector<std::vector<GatingScores>> tokens;
    tokens.reserve(static_cast<std::size_t>(w.tokens_per_request));
    for (int k = 0; k < w.tokens_per_request; ++k) {
      std::vector<GatingScores> layers;
      for (int l = 0; l < sc_.model.num_layers; ++l) layers.push_back(sampler_->sample(gate_rng, l));
      tokens.push_back(std::move(layers));
    }
    trace_.push_back(std::move(tokens));
    requests_.push_back(rq);
  }
}

Route Simulation::route_to(const TopologySnapshot& snap, std::size_t src, std::size_t dst,
                           double power_w, bool& fallback) {
  const auto mask = availability(src);
  fallback = false;
  if (sc_.routing.mode == RoutingMode::ThermalAware) {
    try {
      return thermal_aware_path(snap, thermal_, src, dst, power_w, mask);
    } catch (const ThermalInfeasibleError&) {
      fallback = true;
      ++res_.metrics.thermal_violations;
    }
  }
  return layer_preference(candidate_routes(snap, src, dst, mask), sc_.routing.latency_sensitive).front();
}

void Simulation::transmit(const TopologySnapshot& snap, const Route& route, std::uint64_t bytes, double t,
                          double ratio, bool fallback) {
  const double joules = sc_.power.tx_w_per_gbps * 8.0 * static_cast<double>(bytes) / 1e9;
  for (std::size_t i = 0; i + 1 < route.nodes.size(); ++i) book(route.nodes[i], joules, false);
  res_.metrics.bytes_moved += bytes;
  if (opt_.keep_logs) {
    res_.transmissions.push_back({t, snap.nodes[route.nodes.front()], snap.nodes[route.nodes.back()], route.hops,
                                  bytes, ratio, fallback});
  }
}

double Simulation::process_spacemoe(Request& rq, int token, double t) {
  const auto& snap = snapshot(interval_);
  const std::size_t src = rq.source;
  const auto& delays = delays_from(src);
  const auto& spec = sc_.model;

  SelectionContext ctx;
  ctx.spec = &spec;
  ctx.placement = &res_.placement;
  ctx.topo = &snap;
  ctx.source = src;
  ctx.delay = &delays;
  ctx.similarity = &similarity_;
  ctx.energy.batteries = &battery_;
  ctx.energy.pending_load_w = &pending_w_;
  ctx.energy.power = sc_.power;
  ctx.energy.degradation = sc_.degradation;
  ctx.energy.window_s = dt_;
  ctx.energy.compute_flops = sc_.compute_flops;

  const auto rq_index = static_cast<std::size_t>(&rq - requests_.data());
  double latency = 0.0, compute_total = 0.0, comm_total = 0.0, utility = 0.0;
  for (int l = 0; l < spec.num_layers; ++l) {
    const auto& g = trace_[rq_index][static_cast<std::size_t>(token)][static_cast<std::size_t>(l)];
    const auto out = select(sc_.selection, g, ctx);
    res_.metrics.dropped_experts += out.dropped.size();
    res_.metrics.substitutions += out.substitutions.size();

    book(src, dense_j_, true);

    std::vector<Branch> branches;
    for (std::size_t i = 0; i < out.executed.size(); ++i) {
      const auto host = out.executed[i].host_index;
      auto it = std::find_if(branches.begin(), branches.end(), [&](const Branch& b) { return b.host == host; });
      if (it == branches.end()) {
        branches.push_back({host, {}, 0.0, 0.0, 0.0});
        it = branches.end() - 1;
      }
      it->members.push_back(i);
    }

    double layer_utility = 0.0;
    for (auto& b : branches) {
      if (b.host != src) {
        double importance = 0.0;
        for (const auto m : b.members) importance += out.executed[m].weight;
        importance = std::min(1.0, importance);
        const double ratio = compression_ratio_for(importance, sc_.routing.transmit);
        const auto bytes = static_cast<std::uint64_t>(std::ceil(static_cast<double>(hidden_bytes_) * ratio));
        const double fwd_power = sc_.power.tx_w_per_gbps * 8.0 * static_cast<double>(bytes) / 1e9 / dt_;
        bool fallback = false;
        const Route route = route_to(snap, src, b.host, fwd_power, fallback);
        const auto plan = plan_transmission(importance, {route}, hidden_bytes_, sc_.routing.transmit,
                                            sc_.routing.latency_sensitive);
        b.distortion = plan.distortion;
        b.comm_s = 2.0 * plan.route.transfer_time_s(snap, plan.bytes_on_wire);
        transmit(snap, plan.route, plan.bytes_on_wire, t, plan.compression_ratio, fallback);
        transmit(snap, plan.route.reversed(), plan.bytes_on_wire, t, plan.compression_ratio, fallback);
        remote_ += b.members.size();
      }
      b.compute_s = static_cast<double>(b.members.size()) * tau_expert_;
      for (const auto m : b.members) {
        book(b.host, expert_j_, true);
        layer_utility += out.contribution[m] * (1.0 - b.distortion);
      }
      executed_ += b.members.size();
    }

    double crit_compute = 0.0, crit_comm = 0.0, slowest = -1.0;
    for (const auto& b : branches) {
      if (b.comm_s + b.compute_s > slowest) {
        slowest = b.comm_s + b.compute_s;
        crit_compute = b.compute_s;
        crit_comm = b.comm_s;
      }
    }
    const double layer_compute = tau_dense_ + crit_compute;
    latency += layer_compute + crit_comm;
    compute_total += layer_compute;
    comm_total += crit_comm;
    layer_compute_sum_[l] += layer_compute;
    layer_comm_sum_[l] += crit_comm;
    utility += layer_utility;
    ++layer_events_;
    host_sum_ += branches.size();

    if (opt_.keep_logs) {
      SelectionRecord rec{t, l, out.gated, {}, {}, out.utility};
      for (const auto& e : out.executed) {
        rec.executed.push_back(e.expert);
        rec.hosts.push_back(e.host);
      }
      res_.selections.push_back(std::move(rec));
    }
  }
  token_compute_.push_back(compute_total);
  token_comm_.push_back(comm_total);
  token_utility_.push_back(utility / spec.num_layers);
  return compute_total + comm_total;
}

double Simulation::process_split(Request& rq, int token, double t) {
  const auto& snap = snapshot(interval_);
  const std::size_t src = rq.source;
  const auto& spec = sc_.model;
  const auto rq_index = static_cast<std::size_t>(&rq - requests_.data());

  std::size_t here = src;
  double compute_total = 0.0, comm_total = 0.0, utility = 0.0;
  auto hop = [&](std::size_t to, int layer) {
    bool fallback = false;
    const double power = sc_.power.tx_w_per_gbps * 8.0 * static_cast<double>(hidden_bytes_) / 1e9 / dt_;
    const Route route = route_to(snap, here, to, power, fallback);
    const double dt = route.transfer_time_s(snap, hidden_bytes_);
    transmit(snap, route, hidden_bytes_, t, 1.0, fallback);
    comm_total += dt;
    layer_comm_sum_[layer] += dt;
    here = to;
  };

  const auto& groups = sc_.placement.split;
  for (const auto& grp : groups) {
    const std::size_t host = std::find(nodes_.begin(), nodes_.end(), grp.host) - nodes_.begin();
    if (host != here) hop(host, grp.first_layer);
    for (int l = grp.first_layer; l <= grp.last_layer; ++l) {
      const auto& g = trace_[rq_index][static_cast<std::size_t>(token)][static_cast<std::size_t>(l)];
      const auto picks = gate_topk(g, spec.top_k);
      const auto p = softmax(g.scores);
      book(host, dense_j_, true);
      double layer_utility = 0.0;
      for (const auto& c : picks) {
        book(host, expert_j_, true);
        layer_utility += p[c.expert];
      }
      const double layer_compute = tau_dense_ + static_cast<double>(picks.size()) * tau_expert_;
      compute_total += layer_compute;
      layer_compute_sum_[l] += layer_compute;
      utility += layer_utility;
      executed_ += picks.size();
      if (host != src) remote_ += picks.size();
      ++layer_events_;
      ++host_sum_;
      if (opt_.keep_logs) {
        SelectionRecord rec{t, l, {}, {}, {}, layer_utility};
        for (const auto& c : picks) {
          rec.gated.push_back(c.expert);
          rec.executed.push_back(c.expert);
          rec.hosts.push_back(grp.host);
        }
        res_.selections.push_back(std::move(rec));
      }
    }
  }
  if (sc_.placement.split_u_shaped && here != src) hop(src, spec.num_layers - 1);

  token_compute_.push_back(compute_total);
  token_comm_.push_back(comm_total);
  token_utility_.push_back(utility / spec.num_layers);
  return compute_total + comm_total;
}

void Simulation::finalize_metrics() {
  auto& m = res_.metrics;
  const auto& spec = sc_.model;
  m.label = sc_.label;
  m.architecture = to_string(sc_.placement.architecture);
  m.seed = sc_.workload.seed;
  m.requests = requests_.size();
  m.tokens = res_.token_latency_s.size();
  const double n = static_cast<double>(std::max<std::uint64_t>(m.tokens, 1));
  if (m.tokens > 0) {
    m.avg_latency_s = std::accumulate(res_.token_latency_s.begin(), res_.token_latency_s.end(), 0.0) / n;
    m.p50_latency_s = nearest_rank(res_.token_latency_s, 0.50);
    m.p95_latency_s = nearest_rank(res_.token_latency_s, 0.95);
    m.mean_compute_latency_s = std::accumulate(token_compute_.begin(), token_compute_.end(), 0.0) / n;
    m.mean_comm_latency_s = std::accumulate(token_comm_.begin(), token_comm_.end(), 0.0) / n;
    m.mean_utility = std::accumulate(token_utility_.begin(), token_utility_.end(), 0.0) / n;
  }
  m.layer_compute_s.resize(static_cast<std::size_t>(spec.num_layers));
  m.layer_comm_s.resize(static_cast<std::size_t>(spec.num_layers));
  for (int l = 0; l < spec.num_layers; ++l) {
    m.layer_compute_s[l] = layer_compute_sum_[l] / n;
    m.layer_comm_s[l] = layer_comm_sum_[l] / n;
  }
  m.compute_energy_wh = compute_j_ / 3600.0;
  m.transmit_energy_wh = transmit_j_ / 3600.0;
  m.total_energy_wh = (compute_j_ + transmit_j_) / 3600.0;
  m.fleet_degradation = 0.0;
  m.min_health = 1.0;
  for (const auto& b : battery_) {
    m.fleet_degradation += b.cumulative_degradation;
    m.min_health = std::min(m.min_health, b.health);
  }
  m.bytes_per_token = static_cast<double>(m.bytes_moved) / n;
  m.remote_fraction = executed_ == 0 ? 0.0 : static_cast<double>(remote_) / static_cast<double>(executed_);
  m.mean_hosts_per_layer =
      layer_events_ == 0 ? 0.0 : static_cast<double>(host_sum_) / static_cast<double>(layer_events_);
  m.replicas = res_.placement.replica_count();
  m.mean_ingress_delay_s = requests_.empty() ? 0.0 : ingress_sum_ / static_cast<double>(requests_.size());

  const SatelliteId src = nodes_[requests_.empty() ? 0 : requests_.front().source];
  const auto it = res_.placement.memory_used.find(src);
  std::uint64_t at_source = it == res_.placement.memory_used.end() ? 0 : it->second;
  std::uint64_t dense_layers = static_cast<std::uint64_t>(spec.num_layers);
  if (sc_.placement.architecture == Architecture::Split) {
    dense_layers = 0;
    for (const auto& g : sc_.placement.split) {
      if (g.host == src) dense_layers += group_layers(g);
    }
  }
  m.source_memory_bytes = at_source + spec.non_expert_memory_bytes * dense_layers / spec.num_layers;
}

RunResult Simulation::run() {
  sc_.validate();
  dt_ = sc_.snapshot_interval_s;
  const auto& spec = sc_.model;
  hidden_bytes_ = hidden_state_bytes(spec);
  tau_expert_ = spec.expert_flops / sc_.compute_flops;
  tau_dense_ = spec.non_expert_flops / sc_.compute_flops;
  expert_j_ = sc_.power.compute_w_per_gflops * spec.expert_flops / 1e9;
  dense_j_ = sc_.power.compute_w_per_gflops * spec.non_expert_flops / 1e9;

  const auto& first = snapshot(0);
  nodes_ = first.nodes;
  std::map<int, double> altitude;
  for (const auto& s : sc_.shells) altitude[s.shell_id] = s.altitude_km;
  for (const auto& id : nodes_) view_factor_.push_back(earth_view_factor(altitude[id.shell]));
  battery_.assign(nodes_.size(), sc_.battery);
  thermal_.assign(nodes_.size(), ThermalState{});
  energy_j_.assign(nodes_.size(), 0.0);
  pending_w_.assign(nodes_.size(), 0.0);
  unavailable_.assign(nodes_.size(), false);
  layer_compute_sum_.assign(static_cast<std::size_t>(spec.num_layers), 0.0);
  layer_comm_sum_.assign(static_cast<std::size_t>(spec.num_layers), 0.0);

  sampler_.emplace(spec, sc_.skew, sc_.workload.seed);
  similarity_ = make_similarity(spec, sc_.similarity_tau, sc_.workload.seed);
  {
    auto profile_rng = make_stream(sc_.workload.seed, 1);
    res_.profile = profile_activations(spec, *sampler_, profile_rng, sc_.workload.profile_tokens);
  }

  const SatelliteId placement_src = sc_.workload.source.mode == SourceSpec::Mode::Fixed
                                        ? sc_.workload.source.satellite
                                        : best_visible_satellite(sc_, 0.0);
  build_placement(first.index_of(placement_src));
  generate_workload();
  for (const auto& rq : requests_) ingress_sum_ += rq.ingress_delay_s;

  using Event = std::tuple<double, std::size_t, int>;  // time, request, token
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  for (std::size_t r = 0; r < requests_.size(); ++r) events.push({requests_[r].arrival, r, 0});

  const bool split = sc_.placement.architecture == Architecture::Split;
  while (!events.empty()) {
    const auto [t, r, token] = events.top();
    events.pop();
    advance_to(t);
    auto& rq = requests_[r];
    const double latency = split ? process_split(rq, token, t) : process_spacemoe(rq, token, t);
    res_.token_latency_s.push_back(latency);
    if (token + 1 < sc_.workload.tokens_per_request) events.push({t + latency, r, token + 1});
  }
  if (interval_ < 0) open_interval(0);
  close_interval();
  finalize_metrics();
  return std::move(res_);
}

}  // namespace

bool WorkloadSpec::operator==(const WorkloadSpec& o) const {
  return arrival_rate_hz == o.arrival_rate_hz && tokens_per_request == o.tokens_per_request &&
         duration_s == o.duration_s && seed == o.seed && poisson == o.poisson &&
         profile_tokens == o.profile_tokens;
}

PlacementStrategy parse_placement_strategy(const std::string& name) {
  if (name == "static") return PlacementStrategy::Static;
  if (name == "mobility_aware") return PlacementStrategy::MobilityAware;
  if (name == "coactivation") return PlacementStrategy::Coactivation;
  if (name == "all_on_source") return PlacementStrategy::AllOnSource;
  if (name == "given") return PlacementStrategy::Given;
  throw ParameterError("unknown placement strategy '" + name +
                       "' (static|mobility_aware|coactivation|all_on_source|given)");
}

std::string to_string(PlacementStrategy s) {
  switch (s) {
    case PlacementStrategy::Static: return "static";
    case PlacementStrategy::MobilityAware: return "mobility_aware";
    case PlacementStrategy::Coactivation: return "coactivation";
    case PlacementStrategy::AllOnSource: return "all_on_source";
    case PlacementStrategy::Given: return "given";
  }
  return "unknown";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "spacemoe") return Architecture::SpaceMoE;
  if (name == "centralized") return Architecture::Centralized;
  if (name == "split") return Architecture::Split;
  throw ParameterError("unknown architecture '" + name + "' (spacemoe|centralized|split)");
}

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::SpaceMoE: return "spacemoe";
    case Architecture::Centralized: return "centralized";
    case Architecture::Split: return "split";
  }
  return "unknown";
}

double Scenario::reference_period_s() const {
  if (shells.empty()) throw ParameterError("scenario has no shells");
  return shells.front().period_s();
}

void Scenario::validate() const {
  if (shells.empty()) throw ParameterError("scenario needs at least one shell");
  std::set<int> ids;
  for (const auto& s : shells) {
    s.validate();
    if (!ids.insert(s.shell_id).second) throw ParameterError("duplicate shell id " + std::to_string(s.shell_id));
  }
  if (!(snapshot_interval_s > 0.0)) throw ParameterError("snapshot interval must be positive");
  if (!(isl.isl_rate_bps > 0.0) || !(isl.cross_shell_rate_bps > 0.0)) throw ParameterError("link rates must be positive");
  normalized(sun_direction);
  model.validate();
  power.validate();
  thermal.validate();
  selection.validate();
  if (!(compute_flops > 0.0)) throw ParameterError("compute rate must be positive");
  if (!(similarity_tau > 0.0)) throw ParameterError("similarity tau must be positive");
  if (battery.capacity_wh <= 0.0 || battery.soc < 0.0 || battery.soc > 1.0) {
    throw ParameterError("initial battery state out of range");
  }
  const auto& w = workload;
  if (!(w.arrival_rate_hz > 0.0)) throw ParameterError("arrival rate must be positive");
  if (w.tokens_per_request < 1) throw ParameterError("requests need at least one token");
  if (!(w.duration_s > 0.0)) throw ParameterError("duration must be positive");
  if (w.profile_tokens < 1) throw ParameterError("profile needs at least one token");
  if (w.source.mode == SourceSpec::Mode::Fixed) {
    const auto& s = w.source.satellite;
    bool found = false;
    for (const auto& sh : shells) {
      if (sh.shell_id == s.shell && s.plane < sh.planes && s.slot < sh.sats_per_plane) found = true;
    }
    if (!found) throw ParameterError("source satellite " + s.str() + " is not in the constellation");
  }
  if (!(placement.sample_interval_s > 0.0)) throw ParameterError("placement sample interval must be positive");
  if (placement.horizon_s < 0.0) throw ParameterError("placement horizon must be >= 0");
  const auto& tp = routing.transmit;
  if (tp.r_min <= 0.0 || tp.r_min > 1.0) throw ParameterError("r_min must lie in (0, 1]");
  if (tp.d_max < 0.0 || tp.d_max >= 1.0) throw ParameterError("d_max must lie in [0, 1)");
  if (tp.gamma < 0.0) throw ParameterError("gamma must be >= 0");
}

bool same_measurements(const RunMetrics& a, const RunMetrics& b) {
  auto tie = [](const RunMetrics& m) {
    return std::tie(m.seed, m.requests, m.tokens, m.avg_latency_s, m.p50_latency_s, m.p95_latency_s,
                    m.mean_compute_latency_s, m.mean_comm_latency_s, m.layer_compute_s, m.layer_comm_s,
                    m.total_energy_wh, m.compute_energy_wh, m.transmit_energy_wh, m.fleet_degradation,
                    m.min_health, m.mean_utility, m.thermal_violations, m.no_route_events, m.brownouts,
                    m.dropped_experts, m.substitutions, m.bytes_moved, m.bytes_per_token, m.remote_fraction,
                    m.mean_hosts_per_layer, m.source_memory_bytes, m.replicas, m.mean_ingress_delay_s);
  };
  return tie(a) == tie(b);
}

nlohmann::json metrics_to_json(const RunMetrics& m) {
  return nlohmann::json{{"label", m.label},
                        {"architecture", m.architecture},
                        {"seed", m.seed},
                        {"requests", m.requests},
                        {"tokens", m.tokens},
                        {"avg_latency_s", m.avg_latency_s},
                        {"p50_latency_s", m.p50_latency_s},
                        {"p95_latency_s", m.p95_latency_s},
                        {"mean_compute_latency_s", m.mean_compute_latency_s},
                        {"mean_comm_latency_s", m.mean_comm_latency_s},
                        {"layer_compute_s", m.layer_compute_s},
                        {"layer_comm_s", m.layer_comm_s},
                        {"total_energy_wh", m.total_energy_wh},
                        {"compute_energy_wh", m.compute_energy_wh},
                        {"transmit_energy_wh", m.transmit_energy_wh},
                        {"fleet_degradation", m.fleet_degradation},
                        {"min_health", m.min_health},
                        {"mean_utility", m.mean_utility},
                        {"thermal_violations", m.thermal_violations},
                        {"no_route_events", m.no_route_events},
                        {"brownouts", m.brownouts},
                        {"dropped_experts", m.dropped_experts},
                        {"substitutions", m.substitutions},
                        {"bytes_moved", m.bytes_moved},
                        {"bytes_per_token", m.bytes_per_token},
                        {"remote_fraction", m.remote_fraction},
                        {"mean_hosts_per_layer", m.mean_hosts_per_layer},
                        {"source_memory_bytes", m.source_memory_bytes},
                        {"replicas", m.replicas},
                        {"mean_ingress_delay_s", m.mean_ingress_delay_s}};
}

std::vector<std::string> summary_columns() {
  return {"label",          "architecture",       "seed",
          "tokens",         "avg_latency_s",      "p50_latency_s",
          "p95_latency_s",  "mean_compute_latency_s", "mean_comm_latency_s",
          "total_energy_wh", "fleet_degradation", "mean_utility",
          "thermal_violations", "brownouts",      "dropped_experts",
          "bytes_moved",    "bytes_per_token",    "remote_fraction",
          "mean_hosts_per_layer", "source_memory_bytes", "replicas"};
}

std::vector<std::string> summary_values(const RunMetrics& m) {
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  return {m.label,
          m.architecture,
          std::to_string(m.seed),
          std::to_string(m.tokens),
          num(m.avg_latency_s),
          num(m.p50_latency_s),
          num(m.p95_latency_s),
          num(m.mean_compute_latency_s),
          num(m.mean_comm_latency_s),
          num(m.total_energy_wh),
          num(m.fleet_degradation),
          num(m.mean_utility),
          std::to_string(m.thermal_violations),
          std::to_string(m.brownouts),
          std::to_string(m.dropped_experts),
          std::to_string(m.bytes_moved),
          num(m.bytes_per_token),
          num(m.remote_fraction),
          num(m.mean_hosts_per_layer),
          std::to_string(m.source_memory_bytes),
          std::to_string(m.replicas)};
}

RunResult simulate(const Scenario& scenario, const RunOptions& options) {
  Simulation sim(scenario, options);
  return sim.run();
}

RunMetrics run(const Scenario& scenario) { return simulate(scenario).metrics; }

RunMetrics run_baseline_centralized(const Scenario& scenario) {
  Scenario sc = scenario;
  sc.placement.architecture = Architecture::Centralized;
  sc.placement.replica_budget_bytes = 0;
  return run(sc);
}

RunMetrics run_baseline_split(const Scenario& scenario, const std::vector<SplitGroup>& partition,
                              bool u_shaped) {
  Scenario sc = scenario;
  sc.placement.architecture = Architecture::Split;
  sc.placement.split = partition;
  sc.placement.split_u_shaped = u_shaped;
  return run(sc);
}

void validate_partition(const std::vector<SplitGroup>& partition, int num_layers) {
  if (partition.empty()) throw ParameterError("split partition is empty");
  int next = 0;
  for (const auto& g : partition) {
    if (g.first_layer != next || g.last_layer < g.first_layer) {
      throw ParameterError("split groups must be contiguous and disjoint, starting at layer 0 (group at " +
                           std::to_string(g.first_layer) + ")");
    }
    next = g.last_layer + 1;
  }
  if (next != num_layers) throw ParameterError("split partition does not cover all " + std::to_string(num_layers) + " layers");
}

Comparison compare(const std::vector<Scenario>& scenarios) {
  if (scenarios.size() < 2) throw ComparisonError("comparison needs at least two scenarios");
  for (const auto& sc : scenarios) {
    if (!(sc.workload == scenarios.front().workload)) {
      throw ComparisonError("scenario '" + sc.label + "' uses a different seed or workload than '" +
                            scenarios.front().label + "'");
    }
  }
  Comparison c;
  for (const auto& sc : scenarios) c.rows.push_back(run(sc));
  return c;
}

std::vector<ThermalRow> thermal_series(const Scenario& scenario, double horizon_s,
                                       const std::vector<SatelliteId>& sats) {
  scenario.validate();
  const auto sun = normalized(scenario.sun_direction);
  std::vector<ThermalRow> rows;
  const long steps = static_cast<long>(std::floor(horizon_s / scenario.snapshot_interval_s + 1e-9));
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * scenario.snapshot_interval_s;
    for (const auto& shell : scenario.shells) {
      const double vf = earth_view_factor(shell.altitude_km);
      for (const auto& sp : propagate(shell, t)) {
        if (!sats.empty() && std::find(sats.begin(), sats.end(), sp.id) == sats.end()) continue;
        const auto st = thermal_budget(scenario.thermal, sunlit(sp.pos, sun), vf);
        rows.push_back({t, sp.id, st.p_rad_w, st.p_abs_w, st.budget_w});
      }
    }
  }
  return rows;
}

SatelliteId best_visible_satellite(const Scenario& scenario, double t, double* elevation_deg_out) {
  SatelliteId best{};
  double best_el = -kInf;
  for (const auto& shell : scenario.shells) {
    for (const auto& sp : propagate(shell, t)) {
      const double el = elevation_deg(sp.pos, scenario.workload.source.station);
      if (el > best_el || (el == best_el && sp.id < best)) {
        best_el = el;
        best = sp.id;
      }
    }
  }
  if (elevation_deg_out) *elevation_deg_out = best_el;
  return best;
}

std::vector<TopologySnapshot> placement_series(const Scenario& scenario) {
  const double horizon = scenario.placement.horizon_s > 0.0 ? scenario.placement.horizon_s
                                                            : scenario.reference_period_s();
  std::vector<TopologySnapshot> series;
  for (double t = 0.0; t < horizon; t += scenario.placement.sample_interval_s) {
    series.push_back(snapshot_at(scenario.shells, t, scenario.isl, scenario.sun_direction));
  }
  return series;
}

}  // namespace spacemoe

#include "spacemoe/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spacemoe/error.hpp"

namespace spacemoe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_context(const SelectionContext& ctx) {
  if (!ctx.spec || !ctx.placement || !ctx.topo || !ctx.delay) {
    throw ParameterError("selection context is incomplete");
  }
}

// Seeds an outcome with the gate's Top-K choice.
SelectionOutcome start(const GatingScores& g, const SelectionContext& ctx,
                       std::vector<GateChoice>& picks) {
  require_context(ctx);
  SelectionOutcome out;
  out.layer = g.layer;
  picks = gate_topk(g, ctx.spec->top_k);
  for (const auto& c : picks) out.gated.push_back(c.expert);
  return out;
}

void execute(SelectionOutcome& out, const SelectionContext& ctx, int gated, int expert, double weight,
             std::size_t host, double contribution) {
  out.executed.push_back({expert, gated, weight, ctx.topo->nodes[host], host});
  out.contribution.push_back(contribution);
  out.utility += contribution;
}

bool taken(const SelectionOutcome& out, int expert) {
  if (std::find(out.gated.begin(), out.gated.end(), expert) != out.gated.end()) return true;
  return std::any_of(out.executed.begin(), out.executed.end(),
                     [&](const ExecutedExpert& e) { return e.expert == expert; });
}

}  // namespace

SelectionKind parse_selection_kind(const std::string& name) {
  if (name == "topk") return SelectionKind::TopK;
  if (name == "similarity_aware") return SelectionKind::SimilarityAware;
  if (name == "degradation_aware") return SelectionKind::DegradationAware;
  throw ParameterError("unknown selection policy '" + name + "' (topk|similarity_aware|degradation_aware)");
}

std::string to_string(SelectionKind kind) {
  switch (kind) {
    case SelectionKind::TopK: return "topk";
    case SelectionKind::SimilarityAware: return "similarity_aware";
    case SelectionKind::DegradationAware: return "degradation_aware";
  }
  return "unknown";
}

void SelectionPolicy::validate() const {
  if (epsilon < 0.0) throw ParameterError("selection epsilon must be >= 0");
  if (w_util < 0.0 || w_deg < 0.0) throw ParameterError("selection weights must be >= 0");
  if (kind == SelectionKind::DegradationAware && w_util == 0.0 && w_deg == 0.0) {
    throw ParameterError("degradation-aware selection needs a positive weight");
  }
}

double expert_energy_wh(const MoEModelSpec& spec, const PowerProfile& power) {
  return power.compute_w_per_gflops * (spec.expert_flops / 1e9) / 3600.0;
}

std::optional<std::size_t> nearest_host(const SelectionContext& ctx, const ExpertKey& key) {
  require_context(ctx);
  std::optional<std::size_t> best;
  const auto& delay = *ctx.delay;
  for (const auto& h : ctx.placement->hosts_of(key)) {
    const std::size_t i = ctx.topo->index_of(h);
    if (delay[i] == kInf) continue;
    if (!best || delay[i] < delay[*best]) best = i;
  }
  return best;
}

SelectionOutcome select_topk(const GatingScores& g, const SelectionContext& ctx) {
  std::vector<GateChoice> picks;
  auto out = start(g, ctx, picks);
  const auto p = softmax(g.scores);
  for (const auto& c : picks) {
    const auto host = nearest_host(ctx, {g.layer, c.expert});
    if (!host) {
      out.dropped.push_back(c.expert);
      continue;
    }
    execute(out, ctx, c.expert, c.expert, c.weight, *host, p[c.expert]);
  }
  return out;
}

SelectionOutcome select_similarity_aware(const GatingScores& g, const SelectionContext& ctx,
                                         double epsilon) {
  if (epsilon < 0.0) throw ParameterError("selection epsilon must be >= 0");
  if (!ctx.similarity) throw ParameterError("similarity-aware selection needs a similarity model");
  std::vector<GateChoice> picks;
  auto out = start(g, ctx, picks);
  const auto p = softmax(g.scores);
  const auto& delay = *ctx.delay;
  const int E = static_cast<int>(g.scores.size());

  for (const auto& c : picks) {
    const int i = c.expert;
    const auto host = nearest_host(ctx, {g.layer, i});
    if (host && *host == ctx.source) {
      execute(out, ctx, i, i, c.weight, *host, p[i]);
      continue;
    }
    const double own_delay = host ? delay[*host] : kInf;
    int best = -1;
    std::size_t best_host = 0;
    double best_sim = -1.0;
    for (int j = 0; j < E; ++j) {
      if (j == i || taken(out, j)) continue;
      const double s = ctx.similarity->at(g.layer, i, j);
      if (1.0 - s > epsilon) continue;
      const auto hj = nearest_host(ctx, {g.layer, j});
      if (!hj || !(delay[*hj] < own_delay)) continue;
      const bool better = s > best_sim || (s == best_sim && delay[*hj] < delay[best_host]);
      if (better) {
        best = j;
        best_host = *hj;
        best_sim = s;
      }
    }
    if (best >= 0) {
      out.substitutions.push_back({i, best, best_sim});
      execute(out, ctx, i, best, c.weight, best_host, best_sim * p[i]);
    } else if (host) {
      execute(out, ctx, i, i, c.weight, *host, p[i]);
    } else {
      out.dropped.push_back(i);
    }
  }
  return out;
}

SelectionOutcome select_degradation_aware(const GatingScores& g, const SelectionContext& ctx,
                                          double epsilon, double w_util, double w_deg) {
  if (epsilon < 0.0) throw ParameterError("selection epsilon must be >= 0");
  const auto& en = ctx.energy;
  if (!en.batteries || !en.pending_load_w) throw ParameterError("degradation-aware selection needs battery state");
  std::vector<GateChoice> picks;
  auto out = start(g, ctx, picks);
  const auto p = softmax(g.scores);
  const auto& delay = *ctx.delay;
  const int E = static_cast<int>(g.scores.size());
  const double energy_wh = expert_energy_wh(*ctx.spec, en.power);

  struct Option {
    int expert;
    std::size_t host;
    double cost;
  };

  for (const auto& c : picks) {
    const int i = c.expert;
    std::vector<Option> options;
    for (int j = 0; j < E; ++j) {
      if (j != i) {
        if (epsilon <= 0.0 || taken(out, j) || std::abs(p[i] - p[j]) > epsilon) continue;
      }
      for (const auto& h : ctx.placement->hosts_of({g.layer, j})) {
        const std::size_t hi = ctx.topo->index_of(h);
        if (delay[hi] == kInf) continue;
        const double cost =
            marginal_degradation_cost((*en.batteries)[hi], en.power, ctx.topo->sunlit[hi], energy_wh,
                                      en.window_s, en.degradation, (*en.pending_load_w)[hi]);
        options.push_back({j, hi, cost});
      }
    }
    if (options.empty()) {
      out.dropped.push_back(i);
      continue;
    }
    double max_cost = 0.0;
    for (const auto& o : options) max_cost = std::max(max_cost, o.cost);
    auto score = [&](const Option& o) {
      const double deg = max_cost > 0.0 ? o.cost / max_cost : 0.0;
      return w_deg * deg + w_util * (p[i] - p[o.expert]);
    };
    const Option* best = &options.front();
    double best_score = score(*best);
    for (const auto& o : options) {
      const double s = score(o);
      bool better = s < best_score;
      if (s == best_score) {
        if (o.expert != best->expert) {
          better = o.expert < best->expert;
        } else if (delay[o.host] != delay[best->host]) {
          better = delay[o.host] < delay[best->host];
        } else {
          better = ctx.topo->nodes[o.host] < ctx.topo->nodes[best->host];
        }
      }
      if (better) {
        best = &o;
        best_score = s;
      }
    }
    if (best->expert != i) out.substitutions.push_back({i, best->expert, 1.0});
    execute(out, ctx, i, best->expert, c.weight, best->host, p[best->expert]);
  }
  return out;
}

SelectionOutcome select(const SelectionPolicy& policy, const GatingScores& g,
                        const SelectionContext& ctx) {
  switch (policy.kind) {
    case SelectionKind::TopK: return select_topk(g, ctx);
    case SelectionKind::SimilarityAware: return select_similarity_aware(g, ctx, policy.epsilon);
    case SelectionKind::DegradationAware:
      return select_degradation_aware(g, ctx, policy.epsilon, policy.w_util, policy.w_deg);
  }
  throw ParameterError("unknown selection policy");
}

}  // namespace spacemoe

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spacemoe/constellation.hpp"
#include "spacemoe/moe.hpp"
#include "spacemoe/placement.hpp"
#include "spacemoe/power.hpp"

namespace spacemoe {

enum class SelectionKind { TopK, SimilarityAware, DegradationAware };

SelectionKind parse_selection_kind(const std::string& name);
std::string to_string(SelectionKind kind);

struct SelectionPolicy {
  SelectionKind kind = SelectionKind::TopK;
  double epsilon = 0.0;
  double w_util = 1.0;
  double w_deg = 1.0;

  void validate() const;
};

// Battery view the degradation-aware policy prices hosts against.
struct EnergyView {
  const std::vector<BatteryState>* batteries = nullptr;
  const std::vector<double>* pending_load_w = nullptr;  // load already booked this window
  PowerProfile power{};
  DegradationParams degradation{};
  double window_s = 10.0;
  double compute_flops = 1e13;
};

// Read-only state a selection decision sees.
struct SelectionContext {
  const MoEModelSpec* spec = nullptr;
  const PlacementMap* placement = nullptr;
  const TopologySnapshot* topo = nullptr;
  std::size_t source = 0;
  // Shortest delay from the source per node; +inf marks unreachable or
  // unavailable satellites.
  const std::vector<double>* delay = nullptr;
  const ExpertSimilarity* similarity = nullptr;
  EnergyView energy{};
};

struct ExecutedExpert {
  int expert = 0;
  int gated_expert = 0;  // expert the gate asked for
  double weight = 0.0;   // gate weight of the gated expert
  SatelliteId host;
  std::size_t host_index = 0;
};

struct Substitution {
  int gated_expert = 0;
  int substitute_expert = 0;
  double similarity = 0.0;
};

struct SelectionOutcome {
  int layer = 0;
  std::vector<int> gated;  // Top-K indices in gate order
  std::vector<ExecutedExpert> executed;
  std::vector<Substitution> substitutions;
  std::vector<int> dropped;  // gated experts with no reachable replica
  double utility = 0.0;
  // Utility credited per executed expert, parallel to `executed`.
  std::vector<double> contribution;
};

// Nearest reachable replica by current delay; ties to the lower satellite id.
std::optional<std::size_t> nearest_host(const SelectionContext& ctx, const ExpertKey& key);

SelectionOutcome select_topk(const GatingScores& g, const SelectionContext& ctx);
SelectionOutcome select_similarity_aware(const GatingScores& g, const SelectionContext& ctx,
                                         double epsilon);
SelectionOutcome select_degradation_aware(const GatingScores& g, const SelectionContext& ctx,
                                          double epsilon, double w_util, double w_deg);

SelectionOutcome select(const SelectionPolicy& policy, const GatingScores& g,
                        const SelectionContext& ctx);

// Energy (Wh) one expert execution draws on its host.
double expert_energy_wh(const MoEModelSpec& spec, const PowerProfile& power);

}  // namespace spacemoe

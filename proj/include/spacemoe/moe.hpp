#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

namespace spacemoe {

struct MoEModelSpec {
  int num_layers = 4;
  int experts_per_layer = 8;
  int top_k = 2;
  int hidden_dim = 64;
  int bytes_per_element = 2;
  double expert_flops = 3.5e8;        // per token per expert
  std::uint64_t expert_memory_bytes = 1ull << 20;
  double non_expert_flops = 1.0e8;    // per token per layer
  std::uint64_t non_expert_memory_bytes = 0;

  void validate() const;
  std::uint64_t total_expert_memory_bytes() const;
  std::uint64_t total_memory_bytes() const;
};

std::uint64_t hidden_state_bytes(const MoEModelSpec& spec);

struct ExpertKey {
  int layer = 0;
  int expert = 0;
  auto operator<=>(const ExpertKey&) const = default;
};

struct GatingScores {
  int layer = 0;
  std::vector<double> scores;  // pre-softmax logits, one per expert
};

struct GateChoice {
  int expert = 0;
  double weight = 0.0;
};

// Numerically stable softmax over all logits.
std::vector<double> softmax(std::span<const double> logits);

// K highest logits (ties to the lower index), weights renormalized over the
// selected logits only.
std::vector<GateChoice> gate_topk(const GatingScores& g, int k);

enum class SkewMode {
  LogitNoise,  // mean -s*ln(rank) plus Gaussian noise
  DirectZipf,  // -s*ln(rank) plus standard Gumbel noise: top-1 is an exact Zipf draw
};

struct SkewSpec {
  double exponent = 1.0;     // Zipf s
  double noise_sigma = 0.5;  // Gaussian sigma in LogitNoise mode
  SkewMode mode = SkewMode::LogitNoise;
};

// Zipf probabilities over ranks 1..n.
std::vector<double> zipf_probabilities(int n, double s);

// Synthetic gate-logit generator. Each layer gets a seed-fixed permutation
// from expert index to popularity rank; noise comes from a separate stream so
// a profiling trace and a workload trace share the same popularity structure.
class GatingSampler {
 public:
  GatingSampler(const MoEModelSpec& spec, SkewSpec skew, std::uint64_t seed);

  GatingScores sample(std::mt19937_64& rng, int layer) const;
  // 1-based popularity rank of an expert.
  int rank_of(int layer, int expert) const { return ranks_[layer][expert]; }
  // Expert holding a given 1-based rank.
  int expert_at_rank(int layer, int rank) const;
  const SkewSpec& skew() const { return skew_; }
  int num_experts() const { return experts_; }

 private:
  int experts_;
  SkewSpec skew_;
  std::vector<std::vector<int>> ranks_;
};

// Deterministic RNG stream derived from a scenario seed and a stream tag.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

struct ActivationStats {
  int num_layers = 0;
  int experts_per_layer = 0;
  std::vector<std::vector<std::uint64_t>> activation_count;                // [layer][e]
  std::vector<std::vector<std::vector<std::uint64_t>>> coactivation_count;  // [layer][i][j]
  std::uint64_t tokens = 0;

  static ActivationStats empty(int layers, int experts);
  std::uint64_t total(int layer) const;
  std::uint64_t total() const;
  // Share of selection events of the layer that picked this expert.
  double frequency(int layer, int expert) const;
};

void record_activation(ActivationStats& stats, int layer, std::span<const int> selected);

nlohmann::json activation_stats_to_json(const ActivationStats& stats);
ActivationStats activation_stats_from_json(const nlohmann::json& doc);

// Replays `tokens` sampled tokens through Top-K gating.
ActivationStats profile_activations(const MoEModelSpec& spec, const GatingSampler& sampler,
                                    std::mt19937_64& rng, int tokens);

struct ExpertSimilarity {
  std::vector<std::vector<std::vector<double>>> sim;  // [layer][i][j]

  double at(int layer, int i, int j) const { return sim[layer][i][j]; }
};

// exp(-chord/tau) over a seeded random embedding of each layer's experts on
// the unit circle.
ExpertSimilarity make_similarity(const MoEModelSpec& spec, double tau, std::uint64_t seed);

}  // namespace spacemoe

#include "spacemoe/moe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "spacemoe/error.hpp"

namespace spacemoe {

void MoEModelSpec::validate() const {
  if (num_layers < 1) throw ParameterError("model needs at least one layer");
  if (experts_per_layer < 1) throw ParameterError("model needs at least one expert per layer");
  if (top_k < 1 || top_k > experts_per_layer) {
    throw ParameterError("top_k must lie in [1, experts_per_layer]");
  }
  if (hidden_dim < 1 || bytes_per_element < 1) {
    throw ParameterError("hidden state size must be positive");
  }
  if (expert_flops < 0.0 || non_expert_flops < 0.0) throw ParameterError("flop counts must be >= 0");
}

std::uint64_t MoEModelSpec::total_expert_memory_bytes() const {
  return static_cast<std::uint64_t>(num_layers) * static_cast<std::uint64_t>(experts_per_layer) *
         expert_memory_bytes;
}

std::uint64_t MoEModelSpec::total_memory_bytes() const {
  return total_expert_memory_bytes() + non_expert_memory_bytes;
}

std::uint64_t hidden_state_bytes(const MoEModelSpec& spec) {
  if (spec.hidden_dim < 1 || spec.bytes_per_element < 1) {
    throw ParameterError("hidden state size must be positive");
  }
  return static_cast<std::uint64_t>(spec.hidden_dim) * static_cast<std::uint64_t>(spec.bytes_per_element);
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double hi = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

std::vector<GateChoice> gate_topk(const GatingScores& g, int k) {
  const int e = static_cast<int>(g.scores.size());
  if (k < 1 || k > e) {
    throw ParameterError("top-k with K=" + std::to_string(k) + " over " + std::to_string(e) + " experts");
  }
  std::vector<int> order(static_cast<std::size_t>(e));
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
    if (g.scores[a] != g.scores[b]) return g.scores[a] > g.scores[b];
    return a < b;
  });
  std::vector<double> picked(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) picked[i] = g.scores[order[i]];
  const auto w = softmax(picked);
  std::vector<GateChoice> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out.push_back({order[i], w[i]});
  return out;
}

std::vector<double> zipf_probabilities(int n, double s) {
  std::vector<double> p(static_cast<std::size_t>(n));
  double h = 0.0;
  for (int r = 1; r <= n; ++r) {
    p[r - 1] = std::pow(static_cast<double>(r), -s);
    h += p[r - 1];
  }
  for (auto& v : p) v /= h;
  return p;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

GatingSampler::GatingSampler(const MoEModelSpec& spec, SkewSpec skew, std::uint64_t seed)
    : experts_(spec.experts_per_layer), skew_(skew) {
  spec.validate();
  if (skew.exponent < 0.0 || skew.noise_sigma < 0.0) {
    throw ParameterError("skew exponent and noise sigma must be >= 0");
  }
  ranks_.resize(static_cast<std::size_t>(spec.num_layers));
  for (int l = 0; l < spec.num_layers; ++l) {
    auto rng = make_stream(seed, 0x7a1f0000ull + static_cast<std::uint64_t>(l));
    std::vector<int> perm(static_cast<std::size_t>(experts_));
    std::iota(perm.begin(), perm.end(), 1);
    std::shuffle(perm.begin(), perm.end(), rng);
    ranks_[l] = std::move(perm);
  }
}

int GatingSampler::expert_at_rank(int layer, int rank) const {
  const auto& r = ranks_.at(static_cast<std::size_t>(layer));
  return static_cast<int>(std::find(r.begin(), r.end(), rank) - r.begin());
}

GatingScores GatingSampler::sample(std::mt19937_64& rng, int layer) const {
  GatingScores g;
  g.layer = layer;
  g.scores.resize(static_cast<std::size_t>(experts_));
  const auto& ranks = ranks_.at(static_cast<std::size_t>(layer));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int e = 0; e < experts_; ++e) {
    double logit = -skew_.exponent * std::log(static_cast<double>(ranks[e]));
    if (skew_.mode == SkewMode::LogitNoise) {
      if (skew_.noise_sigma > 0.0) logit += skew_.noise_sigma * normal(rng);
    } else {
      double u = uniform(rng);
      while (u <= 0.0) u = uniform(rng);
      logit += -std::log(-std::log(u));
    }
    g.scores[e] = logit;
  }
  return g;
}

ActivationStats ActivationStats::empty(int layers, int experts) {
  ActivationStats s;
  s.num_layers = layers;
  s.experts_per_layer = experts;
  s.activation_count.assign(layers, std::vector<std::uint64_t>(experts, 0));
  s.coactivation_count.assign(
      layers, std::vector<std::vector<std::uint64_t>>(experts, std::vector<std::uint64_t>(experts, 0)));
  return s;
}

std::uint64_t ActivationStats::total(int layer) const {
  const auto& c = activation_count.at(static_cast<std::size_t>(layer));
  return std::accumulate(c.begin(), c.end(), std::uint64_t{0});
}

std::uint64_t ActivationStats::total() const {
  std::uint64_t t = 0;
  for (int l = 0; l < num_layers; ++l) t += total(l);
  return t;
}

double ActivationStats::frequency(int layer, int expert) const {
  const auto t = total(layer);
  if (t == 0) return 0.0;
  return static_cast<double>(activation_count[layer][expert]) / static_cast<double>(t);
}

void record_activation(ActivationStats& stats, int layer, std::span<const int> selected) {
  if (layer < 0 || layer >= stats.num_layers) throw ParameterError("layer out of range");
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (selected[i] < 0 || selected[i] >= stats.experts_per_layer) {
      throw ParameterError("expert index " + std::to_string(selected[i]) + " out of range");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (selected[i] == selected[j]) throw ParameterError("duplicate expert in selection");
    }
  }
  auto& count = stats.activation_count[layer];
  auto& co = stats.coactivation_count[layer];
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const int a = selected[i];
    ++count[a];
    ++co[a][a];
    for (std::size_t j = i + 1; j < selected.size(); ++j) {
      const int b = selected[j];
      ++co[a][b];
      ++co[b][a];
    }
  }
}

nlohmann::json activation_stats_to_json(const ActivationStats& stats) {
  return nlohmann::json{{"num_layers", stats.num_layers},
                        {"experts_per_layer", stats.experts_per_layer},
                        {"tokens", stats.tokens},
                        {"activation_count", stats.activation_count},
                        {"coactivation_count", stats.coactivation_count}};
}

ActivationStats activation_stats_from_json(const nlohmann::json& doc) {
  ActivationStats s = ActivationStats::empty(doc.at("num_layers").get<int>(),
                                             doc.at("experts_per_layer").get<int>());
  s.tokens = doc.value("tokens", std::uint64_t{0});
  s.activation_count = doc.at("activation_count").get<decltype(s.activation_count)>();
  s.coactivation_count = doc.at("coactivation_count").get<decltype(s.coactivation_count)>();
  const auto L = static_cast<std::size_t>(s.num_layers);
  const auto E = static_cast<std::size_t>(s.experts_per_layer);
  if (s.activation_count.size() != L || s.coactivation_count.size() != L) {
    throw ParameterError("activation stats: layer count mismatch");
  }
  for (std::size_t l = 0; l < L; ++l) {
    if (s.activation_count[l].size() != E || s.coactivation_count[l].size() != E) {
      throw ParameterError("activation stats: expert count mismatch");
    }
    for (std::size_t i = 0; i < E; ++i) {
      if (s.coactivation_count[l][i].size() != E) throw ParameterError("activation stats: ragged matrix");
      for (std::size_t j = 0; j < i; ++j) {
        if (s.coactivation_count[l][i][j] != s.coactivation_count[l][j][i]) {
          throw ParameterError("activation stats: co-activation matrix not symmetric");
        }
      }
    }
  }
  return s;
}

ActivationStats profile_activations(const MoEModelSpec& spec, const GatingSampler& sampler,
                                    std::mt19937_64& rng, int tokens) {
  auto stats = ActivationStats::empty(spec.num_layers, spec.experts_per_layer);
  std::vector<int> chosen;
  for (int t = 0; t < tokens; ++t) {
    for (int l = 0; l < spec.num_layers; ++l) {
      const auto picks = gate_topk(sampler.sample(rng, l), spec.top_k);
      chosen.clear();
      for (const auto& c : picks) chosen.push_back(c.expert);
      record_activation(stats, l, chosen);
    }
    ++stats.tokens;
  }
  return stats;
}

ExpertSimilarity make_similarity(const MoEModelSpec& spec, double tau, std::uint64_t seed) {
  if (!(tau > 0.0)) throw ParameterError("similarity length scale must be positive");
  ExpertSimilarity out;
  const int E = spec.experts_per_layer;
  out.sim.resize(static_cast<std::size_t>(spec.num_layers));
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (int l = 0; l < spec.num_layers; ++l) {
    auto rng = make_stream(seed, 0x51a10000ull + static_cast<std::uint64_t>(l));
    std::vector<double> theta(static_cast<std::size_t>(E));
    for (auto& th : theta) th = angle(rng);
    auto& m = out.sim[l];
    m.assign(E, std::vector<double>(E, 1.0));
    for (int i = 0; i < E; ++i) {
      for (int j = i + 1; j < E; ++j) {
        const double chord = 2.0 * std::abs(std::sin((theta[i] - theta[j]) / 2.0));
        m[i][j] = m[j][i] = std::exp(-chord / tau);
      }
    }
  }
  return out;
}

}  // namespace spacemoe

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "spacemoe/error.hpp"
#include "spacemoe/moe.hpp"

using namespace spacemoe;

namespace {

// Independent softmax over a subset of logits, computed without the library.
std::vector<double> subset_softmax(const std::vector<double>& logits, const std::vector<int>& idx) {
  double z = 0.0;
  for (int i : idx) z += std::exp(logits[i]);
  std::vector<double> w;
  for (int i : idx) w.push_back(std::exp(logits[i]) / z);
  return w;
}

std::vector<double> top1_frequency(const MoEModelSpec& spec, const SkewSpec& skew, int tokens,
                                   std::uint64_t seed = 9) {
  GatingSampler sampler(spec, skew, seed);
  auto rng = make_stream(seed, 77);
  std::vector<double> freq(static_cast<std::size_t>(spec.experts_per_layer), 0.0);
  for (int t = 0; t < tokens; ++t) {
    const auto g = sampler.sample(rng, 0);
    freq[static_cast<std::size_t>(gate_topk(g, 1).front().expert)] += 1.0 / tokens;
  }
  return freq;
}

}  // namespace

TEST_SUITE("moe") {

TEST_CASE("gate_topk on (2, 1, 0.5, 0.1) with K = 2") {
  const GatingScores g{0, {2.0, 1.0, 0.5, 0.1}};
  const auto picks = gate_topk(g, 2);
  REQUIRE(picks.size() == 2);
  CHECK(picks[0].expert == 0);
  CHECK(picks[1].expert == 1);
  CHECK(picks[0].weight == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(picks[1].weight == doctest::Approx(0.2689).epsilon(1e-4));
  CHECK(picks[0].weight == doctest::Approx(std::exp(2.0) / (std::exp(2.0) + std::exp(1.0))).epsilon(1e-12));
}

TEST_CASE("gate_topk with K = E equals the full softmax") {
  const GatingScores g{0, {0.3, -1.0, 2.5, 0.0, 1.1}};
  const auto picks = gate_topk(g, 5);
  const auto full = softmax(g.scores);
  REQUIRE(picks.size() == 5);
  for (const auto& c : picks) CHECK(c.weight == doctest::Approx(full[c.expert]).epsilon(1e-12));
}

TEST_CASE("equal logits tie to lower indices") {
  const GatingScores g{0, {1.0, 1.0, 1.0, 1.0}};
  const auto picks = gate_topk(g, 2);
  CHECK(picks[0].expert == 0);
  CHECK(picks[1].expert == 1);
  CHECK(picks[0].weight == doctest::Approx(0.5));
  CHECK(picks[1].weight == doctest::Approx(0.5));
}

TEST_CASE("K out of range is rejected") {
  const GatingScores g{0, {1.0, 2.0, 3.0}};
  CHECK_THROWS_AS(gate_topk(g, 0), ParameterError);
  CHECK_THROWS_AS(gate_topk(g, 4), ParameterError);
}

TEST_CASE("gate weights: positive, sum to one, shift and transform invariant") {
  auto rng = make_stream(5, 1);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    GatingScores g{0, std::vector<double>(8)};
    for (auto& v : g.scores) v = n(rng);
    for (int k = 1; k <= 8; ++k) {
      const auto picks = gate_topk(g, k);
      double sum = 0.0;
      std::vector<int> idx;
      for (const auto& c : picks) {
        CHECK(c.weight > 0.0);
        sum += c.weight;
        idx.push_back(c.expert);
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
      const auto ref = subset_softmax(g.scores, idx);
      for (std::size_t i = 0; i < picks.size(); ++i) CHECK(std::abs(picks[i].weight - ref[i]) < 1e-9);

      GatingScores shifted = g;
      for (auto& v : shifted.scores) v += 17.5;
      const auto sp = gate_topk(shifted, k);
      GatingScores squashed = g;
      for (auto& v : squashed.scores) v = std::atan(v) * 3.0 + 1.0;  // strictly increasing
      const auto qp = gate_topk(squashed, k);
      for (std::size_t i = 0; i < picks.size(); ++i) {
        CHECK(sp[i].expert == picks[i].expert);
        CHECK(std::abs(sp[i].weight - picks[i].weight) < 1e-9);
        CHECK(qp[i].expert == picks[i].expert);
      }
    }
  }
}

TEST_CASE("softmax is stable for large logits") {
  const std::vector<double> logits{1000.0, 999.0};
  const auto p = softmax(logits);
  CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(std::isfinite(p[1]));
}

TEST_CASE("noise-free skew always picks the rank-1 expert") {
  MoEModelSpec spec;
  spec.top_k = 1;
  SkewSpec skew{1.0, 0.0, SkewMode::LogitNoise};
  GatingSampler sampler(spec, skew, 3);
  auto rng = make_stream(3, 2);
  const int top = sampler.expert_at_rank(0, 1);
  for (int t = 0; t < 500; ++t) CHECK(gate_topk(sampler.sample(rng, 0), 1).front().expert == top);
}

TEST_CASE("s = 0 gives uniform top-1 frequency") {
  MoEModelSpec spec;
  const auto freq = top1_frequency(spec, SkewSpec{0.0, 0.5, SkewMode::LogitNoise}, 10000);
  for (double f : freq) CHECK(std::abs(f - 0.125) < 0.02);
}

TEST_CASE("direct Zipf mode draws rank 1 with probability 1/H8") {
  MoEModelSpec spec;
  const auto zipf = zipf_probabilities(8, 1.0);
  double h8 = 0.0;
  for (int r = 1; r <= 8; ++r) h8 += 1.0 / r;
  CHECK(h8 == doctest::Approx(2.7179).epsilon(1e-4));
  CHECK(zipf[0] == doctest::Approx(1.0 / h8));
  CHECK(zipf[0] == doctest::Approx(0.3679).epsilon(1e-3));

  GatingSampler sampler(spec, SkewSpec{1.0, 0.0, SkewMode::DirectZipf}, 11);
  const auto freq = top1_frequency(spec, SkewSpec{1.0, 0.0, SkewMode::DirectZipf}, 40000, 11);
  for (int r = 1; r <= 8; ++r) {
    CHECK(std::abs(freq[static_cast<std::size_t>(sampler.expert_at_rank(0, r))] - zipf[r - 1]) < 0.01);
  }
}

TEST_CASE("activation frequency is monotone in popularity rank") {
  MoEModelSpec spec;
  GatingSampler sampler(spec, SkewSpec{}, 42);
  auto rng = make_stream(42, 1);
  const auto stats = profile_activations(spec, sampler, rng, 10000);
  for (int l = 0; l < spec.num_layers; ++l) {
    for (int r = 1; r < spec.experts_per_layer; ++r) {
      const double hi = stats.frequency(l, sampler.expert_at_rank(l, r));
      const double lo = stats.frequency(l, sampler.expert_at_rank(l, r + 1));
      CHECK(lo <= hi + 0.02);
    }
  }
}

TEST_CASE("rank permutations are seed-fixed and differ across layers") {
  MoEModelSpec spec;
  GatingSampler a(spec, SkewSpec{}, 42), b(spec, SkewSpec{}, 42);
  bool differs = false;
  for (int l = 0; l < spec.num_layers; ++l) {
    std::vector<int> ranks;
    for (int e = 0; e < spec.experts_per_layer; ++e) {
      CHECK(a.rank_of(l, e) == b.rank_of(l, e));
      CHECK(a.expert_at_rank(l, a.rank_of(l, e)) == e);
      ranks.push_back(a.rank_of(l, e));
      if (a.rank_of(l, e) != a.rank_of(0, e)) differs = true;
    }
    std::sort(ranks.begin(), ranks.end());
    for (int i = 0; i < spec.experts_per_layer; ++i) CHECK(ranks[i] == i + 1);
  }
  CHECK(differs);
}

TEST_CASE("sampling is deterministic given the seed") {
  MoEModelSpec spec;
  GatingSampler sampler(spec, SkewSpec{}, 8);
  auto r1 = make_stream(8, 3), r2 = make_stream(8, 3);
  for (int t = 0; t < 50; ++t) CHECK(sampler.sample(r1, t % 4).scores == sampler.sample(r2, t % 4).scores);
}

TEST_CASE("record_activation counting") {
  auto stats = ActivationStats::empty(1, 8);
  const std::vector<int> pair{2, 5};
  record_activation(stats, 0, pair);
  CHECK(stats.activation_count[0][2] == 1);
  CHECK(stats.activation_count[0][5] == 1);
  CHECK(stats.coactivation_count[0][2][5] == 1);
  CHECK(stats.coactivation_count[0][5][2] == 1);

  const std::vector<int> single{3};
  record_activation(stats, 0, single);
  CHECK(stats.activation_count[0][3] == 1);
  CHECK(stats.coactivation_count[0][3][3] == 1);
  CHECK(stats.coactivation_count[0][3][2] == 0);

  const std::vector<int> bad{8};
  CHECK_THROWS_AS(record_activation(stats, 0, bad), ParameterError);
  const std::vector<int> dup{1, 1};
  CHECK_THROWS_AS(record_activation(stats, 0, dup), ParameterError);
}

TEST_CASE("1000 top-2 selections record 2000 activations, symmetric pairs") {
  MoEModelSpec spec;
  spec.num_layers = 1;
  GatingSampler sampler(spec, SkewSpec{}, 1);
  auto rng = make_stream(1, 1);
  const auto stats = profile_activations(spec, sampler, rng, 1000);
  CHECK(stats.total(0) == 2000);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) CHECK(stats.coactivation_count[0][i][j] == stats.coactivation_count[0][j][i]);
  }
}

TEST_CASE("activation stats JSON round trip") {
  MoEModelSpec spec;
  GatingSampler sampler(spec, SkewSpec{}, 4);
  auto rng = make_stream(4, 1);
  const auto stats = profile_activations(spec, sampler, rng, 300);
  const auto back = activation_stats_from_json(activation_stats_to_json(stats));
  CHECK(back.activation_count == stats.activation_count);
  CHECK(back.coactivation_count == stats.coactivation_count);
  CHECK(back.tokens == stats.tokens);

  auto doc = activation_stats_to_json(stats);
  doc["coactivation_count"][0][0][1] = 999;
  CHECK_THROWS_AS(activation_stats_from_json(doc), ParameterError);
}

TEST_CASE("hidden state bytes") {
  MoEModelSpec spec;
  spec.hidden_dim = 4096;
  spec.bytes_per_element = 2;
  CHECK(hidden_state_bytes(spec) == 8192);
  spec.hidden_dim = 1;
  spec.bytes_per_element = 1;
  CHECK(hidden_state_bytes(spec) == 1);
  spec.hidden_dim = 0;
  CHECK_THROWS_AS(spec.validate(), ParameterError);
}

TEST_CASE("model memory totals") {
  MoEModelSpec spec;
  spec.num_layers = 32;
  spec.experts_per_layer = 8;
  spec.expert_memory_bytes = 375000000;
  CHECK(spec.total_expert_memory_bytes() == 96000000000ull);
}

TEST_CASE("synthetic similarity structure") {
  MoEModelSpec spec;
  const auto sim = make_similarity(spec, 0.3, 42);
  for (int l = 0; l < spec.num_layers; ++l) {
    for (int i = 0; i < 8; ++i) {
      CHECK(sim.at(l, i, i) == 1.0);
      for (int j = 0; j < 8; ++j) {
        CHECK(sim.at(l, i, j) == sim.at(l, j, i));
        CHECK(sim.at(l, i, j) > 0.0);
        CHECK(sim.at(l, i, j) <= 1.0);
        // chord distance is at most 2
        CHECK(sim.at(l, i, j) >= std::exp(-2.0 / 0.3) - 1e-15);
      }
    }
  }
  CHECK(make_similarity(spec, 0.3, 42).sim == sim.sim);
  CHECK_THROWS_AS(make_similarity(spec, 0.0, 42), ParameterError);
}

}  // TEST_SUITE

#pragma once

// Small hand-set models, graphs and scenario configurations used by the
// oracle checks and the test suites.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lorec/config.hpp"
#include "lorec/graph.hpp"
#include "lorec/model.hpp"
#include "lorec/random.hpp"

namespace lorec::harness {

/// Two-layer, five-token model with weights given by a closed-form pattern.
/// variant selects activation (bit 0) and encoder depth (bit 1).
inline ModelParams handset_model(int variant = 0) {
  ModelDims d;
  d.vocab_size = 5;
  d.model_dim = 4;
  d.ffn_dim = 6;
  d.head_count = 2;
  d.layer_count = 2;
  d.max_positions = 24;
  d.feature_dim = 3;
  d.graph_dim = 4;
  d.encoder_rounds = (variant & 2) ? 2 : 1;
  d.max_graph_tokens = 4;
  d.activation = (variant & 1) ? Activation::silu : Activation::relu;
  ModelParams p = ModelParams::zeros(d);
  int tensor = 0;
  ModelParams::for_each_tensor(p, [&](const std::string& name, std::size_t, std::size_t, std::span<double> v) {
    const bool is_norm = name.ends_with("norm");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double x = 0.7 * static_cast<double>(i) + 1.3 * tensor + 0.4 + 0.05 * variant;
      v[i] = is_norm ? 1.0 + 0.1 * std::sin(x) : 0.9 * std::sin(x) * std::cos(0.3 * x);
    }
    ++tensor;
  });
  return p;
}

/// The path A-B-C-D with unit features.
inline Graph path_graph_abcd(int feature_dim = 3) {
  return Graph(4, {{0, 1}, {1, 2}, {2, 3}}, Matrix(4, static_cast<std::size_t>(feature_dim), 1.0));
}

/// Star with `leaves` leaves around node 0.
inline Graph star_graph(int leaves, int feature_dim = 3) {
  std::vector<Edge> e;
  for (int v = 1; v <= leaves; ++v) e.emplace_back(0, v);
  return Graph(leaves + 1, e, Matrix(static_cast<std::size_t>(leaves + 1), static_cast<std::size_t>(feature_dim), 1.0));
}

/// Random simple graph with Gaussian features.
inline Graph random_graph(Rng& rng, int nodes, int max_edges, int feature_dim) {
  std::vector<Edge> edges;
  std::vector<std::vector<bool>> used(static_cast<std::size_t>(nodes), std::vector<bool>(static_cast<std::size_t>(nodes), false));
  for (int k = 0; k < max_edges; ++k) {
    const int u = static_cast<int>(rng.integer(0, nodes - 1));
    const int v = static_cast<int>(rng.integer(0, nodes - 1));
    if (u == v || used[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)]) continue;
    used[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = used[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] = true;
    edges.emplace_back(u, v);
  }
  Matrix x(static_cast<std::size_t>(nodes), static_cast<std::size_t>(feature_dim));
  for (double& f : x.data()) f = rng.normal();
  return Graph(nodes, std::move(edges), std::move(x));
}

struct Scenario {
  std::string name;
  ModelParams params;
  Graph graph;
  TokenSequence prompt;
  LorecConfig config;
};

/// Seeded scenario on the hand-set model: covers armed and unarmed
/// triggers, gate on and off, both look gatings, both orientations and
/// plausibility ratios below one.
inline Scenario handset_scenario(std::uint64_t seed, int index) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  Scenario s;
  s.params = handset_model(index % 4);
  const int nodes = static_cast<int>(rng.integer(3, 7));
  s.graph = random_graph(rng, nodes, 14, s.params.dims.feature_dim);
  const auto j = static_cast<std::size_t>(std::min(nodes, s.params.dims.max_graph_tokens));
  std::vector<int> text;
  const int len = static_cast<int>(rng.integer(2, 4));
  for (int i = 0; i < len; ++i) text.push_back(static_cast<int>(rng.integer(1, 4)));
  s.prompt = TokenSequence::with_graph_prefix(j, 0, text);

  LorecConfig& c = s.config;
  c.seed = rng.next_u64();
  c.max_new_tokens = 3;
  c.end_token = -1;
  static const double gammas[] = {0.0, 1.0, 0.9, 0.95, 0.5};
  c.gamma = gammas[index % 5];
  c.eta = 0.1 + 0.4 * rng.uniform();
  c.alpha = 0.1 + 0.5 * rng.uniform();
  c.omega = rng.uniform();
  c.beta = 1.5 * rng.uniform();
  c.mu = 0.3 + 0.5 * rng.uniform();
  c.tau = 0.7;
  c.kappa = (index % 3 == 2) ? 0.3 : 1.0;
  c.edge_threshold = (index % 2 == 0) ? 0 : 100;  // odd scenarios keep the gate closed
  c.look_layers = LayerRange::absolute(1, 1);
  c.remember_layers = (index % 4 == 3) ? LayerRange::absolute(1, 1) : LayerRange::absolute(0, 1);
  c.look_gating = (index % 6 == 5) ? LookGating::per_layer : LookGating::sticky;
  c.augment_orientation = (index % 7 == 6) ? AugmentOrientation::prose : AugmentOrientation::as_written;
  c.entropy_top_n = (index % 5 == 4) ? 3 : 0;
  c.validate();
  s.name = "handset-" + std::to_string(index);
  return s;
}

}  // namespace lorec::harness

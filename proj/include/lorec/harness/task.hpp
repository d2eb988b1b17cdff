#pragma once

// Synthetic node-classification task whose label lives in the graph while
// the prompt text carries a hint that is often wrong, plus a hand-built
// decoder that reads both and leans on the text.

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "lorec/errors.hpp"
#include "lorec/graph.hpp"
#include "lorec/model.hpp"
#include "lorec/random.hpp"

namespace lorec::harness {

// Toy vocabulary layout.
namespace vocab {
inline constexpr int kGraph = 0;   // placeholder id in graph slots
inline constexpr int kBos = 1;
inline constexpr int kEnd = 2;
inline constexpr int kAsk = 3;
inline constexpr int kFillerBase = 4;
inline constexpr int kFillerCount = 8;
inline constexpr int kLabelBase = 16;
inline constexpr int kHintBase = 32;
inline constexpr int kMaxClasses = 8;
inline constexpr int kMinSize = 48;

inline bool is_special(int id) { return id == kGraph || id == kBos || id == kEnd; }
}  // namespace vocab

struct TaskParams {
  int instances = 200;
  int classes = 4;
  int min_extra_nodes = 0;  // peripheral nodes outside the labelled star
  int max_extra_nodes = 8;
  int min_hints = 1;
  int max_hints = 3;
  int min_fillers = 2;
  int max_fillers = 5;
  double misleading_rate = 0.5;
  int feature_dim = 8;
  std::uint64_t seed = 0;

  void validate() const {
    if (instances < 1) throw ConfigError("task: instances must be >= 1");
    if (classes < 2 || classes > vocab::kMaxClasses) throw ConfigError("task: classes must lie in [2, 8]");
    // Hub degree for class c is c + 3 and must have its own feature bucket.
    if (classes + 3 > feature_dim - 1) throw ConfigError("task: feature_dim too small for the class count");
    if (min_extra_nodes < 0 || max_extra_nodes < min_extra_nodes) throw ConfigError("task: bad extra node range");
    if (min_hints < 1 || max_hints < min_hints) throw ConfigError("task: bad hint count range");
    if (min_fillers < 0 || max_fillers < min_fillers) throw ConfigError("task: bad filler count range");
    if (!(misleading_rate >= 0.0 && misleading_rate <= 1.0)) throw ConfigError("task: misleading_rate outside [0, 1]");
  }

  int max_nodes() const { return 1 + (classes + 2) + max_extra_nodes; }
  friend bool operator==(const TaskParams&, const TaskParams&) = default;
};

struct TaskInstance {
  Graph graph;
  std::vector<int> prompt_text;  // text ids after the graph slots
  int gold_label = 0;            // class index
  int hint_label = 0;            // class the text points at
  bool misleading = false;
};

struct SyntheticTask {
  TaskParams params;
  std::vector<TaskInstance> instances;
};

inline int label_token(int c) { return vocab::kLabelBase + c; }
inline int hint_token(int c) { return vocab::kHintBase + c; }

/// Degree bucket one-hot, clamped to the last bucket.
inline Matrix degree_features(int node_count, const std::vector<Edge>& edges, int feature_dim) {
  std::vector<int> deg(static_cast<std::size_t>(node_count), 0);
  for (const auto& [u, v] : edges) {
    ++deg[static_cast<std::size_t>(u)];
    ++deg[static_cast<std::size_t>(v)];
  }
  Matrix x(static_cast<std::size_t>(node_count), static_cast<std::size_t>(feature_dim));
  for (int v = 0; v < node_count; ++v) {
    x(static_cast<std::size_t>(v), static_cast<std::size_t>(std::min(deg[static_cast<std::size_t>(v)], feature_dim - 1))) = 1.0;
  }
  return x;
}

/// The label is a function of the marked node's degree: class c has node 0
/// with degree c + 3.
inline int label_from_structure(const Graph& g) { return g.degree(0) - 3; }

inline SyntheticTask generate_task(const TaskParams& params) {
  params.validate();
  SyntheticTask task;
  task.params = params;
  Rng rng(params.seed);
  for (int i = 0; i < params.instances; ++i) {
    TaskInstance inst;
    inst.gold_label = static_cast<int>(rng.integer(0, params.classes - 1));
    const int leaves = inst.gold_label + 3;
    const int extra = static_cast<int>(rng.integer(params.min_extra_nodes, params.max_extra_nodes));
    const int n = 1 + leaves + extra;
    std::vector<Edge> edges;
    for (int leaf = 1; leaf <= leaves; ++leaf) edges.emplace_back(0, leaf);
    // Peripheral nodes form a path of their own; degrees stay <= 2.
    for (int k = 1; k < extra; ++k) edges.emplace_back(leaves + k, leaves + k + 1);
    inst.graph = Graph(n, edges, degree_features(n, edges, params.feature_dim));

    inst.misleading = rng.uniform() < params.misleading_rate;
    inst.hint_label = inst.gold_label;
    if (inst.misleading) {
      const int shift = static_cast<int>(rng.integer(1, params.classes - 1));
      inst.hint_label = (inst.gold_label + shift) % params.classes;
    }
    const int hints = static_cast<int>(rng.integer(params.min_hints, params.max_hints));
    const int fillers = static_cast<int>(rng.integer(params.min_fillers, params.max_fillers));
    std::vector<int> body;
    for (int f = 0; f < fillers; ++f) {
      body.push_back(vocab::kFillerBase + static_cast<int>(rng.integer(0, vocab::kFillerCount - 1)));
    }
    for (int h = 0; h < hints; ++h) {
      const auto at = static_cast<std::ptrdiff_t>(rng.integer(0, static_cast<std::int64_t>(body.size())));
      body.insert(body.begin() + at, hint_token(inst.hint_label));
    }
    inst.prompt_text.push_back(vocab::kBos);
    inst.prompt_text.insert(inst.prompt_text.end(), body.begin(), body.end());
    inst.prompt_text.push_back(vocab::kAsk);

    if (label_from_structure(inst.graph) != inst.gold_label) {
      throw InternalError("generate_task: label not recoverable from structure");
    }
    task.instances.push_back(std::move(inst));
  }
  return task;
}

inline TokenSequence prompt_sequence(const TaskInstance& inst, int max_graph_tokens) {
  const auto j = static_cast<std::size_t>(std::min(inst.graph.node_count(), max_graph_tokens));
  return TokenSequence::with_graph_prefix(j, vocab::kGraph, inst.prompt_text);
}

/// Canonical text form: one block per instance.
inline std::string task_to_text(const SyntheticTask& task) {
  std::ostringstream os;
  for (std::size_t i = 0; i < task.instances.size(); ++i) {
    const auto& inst = task.instances[i];
    os << "instance " << i << " gold " << inst.gold_label << " hint " << inst.hint_label << " misleading "
       << int(inst.misleading) << "\nprompt";
    for (int id : inst.prompt_text) os << ' ' << id;
    os << '\n';
    write_graph(os, inst.graph);
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Hand-built decoder for the task.

/// Strengths of the hand-built readout. The readout layer's head 0 attends
/// from the ask token to graph slots (score from graph_key) and hint tokens
/// (score from hint_key) and copies their label directions to the output.
struct ReferenceModelSpec {
  int classes = 4;
  int readout_layer = 5;
  double hint_label = 1.0;       // label magnitude on hint embeddings
  double graph_label = 1.0;      // label magnitude on graph tokens
  double query_gain = 1.0;
  double graph_key = 0.7;
  double hint_key = 0.85;
  double value_gain = 1.0;
  double output_gain = 8.0;
  double answer_gain = 12.0;     // label tokens predict the end token
  double memory_key = 0.03;      // ask-token weight on the memory direction
  double noise = 0.01;
  std::uint64_t seed = 7;
  friend bool operator==(const ReferenceModelSpec&, const ReferenceModelSpec&) = default;
};

namespace dim {
inline constexpr std::size_t kPresence = 8;
inline constexpr std::size_t kAsk = 9;
inline constexpr std::size_t kHint = 10;
inline constexpr std::size_t kAnswered = 11;
inline constexpr std::size_t kFiller = 12;
inline constexpr std::size_t kMemory = 14;
}  // namespace dim

inline ModelDims reference_dims(int feature_dim = 8) {
  ModelDims d;
  d.vocab_size = 64;
  d.model_dim = 64;
  d.ffn_dim = 128;
  d.head_count = 4;
  d.layer_count = 8;
  d.max_positions = 64;
  d.feature_dim = feature_dim;
  d.graph_dim = 16;
  d.encoder_rounds = 1;
  d.max_graph_tokens = 16;
  d.activation = Activation::relu;
  return d;
}

inline ModelParams reference_model(const ReferenceModelSpec& spec, int feature_dim = 8) {
  ModelParams p = random_params(reference_dims(feature_dim), spec.seed, spec.noise);
  const int c_count = spec.classes;

  for (int id = 0; id < p.dims.vocab_size; ++id) {
    auto e = p.token_embedding.row(static_cast<std::size_t>(id));
    if (id >= vocab::kHintBase && id < vocab::kHintBase + c_count) {
      e[static_cast<std::size_t>(id - vocab::kHintBase)] += spec.hint_label;
      e[dim::kHint] += 1.0;
    } else if (id >= vocab::kLabelBase && id < vocab::kLabelBase + c_count) {
      e[dim::kAnswered] += 1.0;
    } else if (id == vocab::kAsk) {
      e[dim::kAsk] += 1.0;
      e[dim::kMemory] += spec.memory_key;
    } else {
      e[dim::kFiller] += 1.0;
    }
  }

  // Encoder: degree bucket c + 3 of a node or of its neighbourhood lights up
  // label c; the bias marks every graph token as present.
  auto& enc = p.encoder[0];
  for (int c = 0; c < c_count; ++c) {
    enc.self_weight(static_cast<std::size_t>(c + 3), static_cast<std::size_t>(c)) = 1.0;
    enc.neighbor_weight(static_cast<std::size_t>(c + 3), static_cast<std::size_t>(c)) = 1.0;
    p.projector(static_cast<std::size_t>(c), static_cast<std::size_t>(c)) += spec.graph_label;
  }
  enc.bias[8] = 1.0;
  p.projector(8, dim::kPresence) += 1.0;
  p.projector(8, dim::kMemory) += 1.0;

  auto& w = p.layers[static_cast<std::size_t>(spec.readout_layer)];
  w.query(dim::kAsk, 0) += spec.query_gain;
  w.key(dim::kPresence, 0) += spec.graph_key;
  w.key(dim::kHint, 0) += spec.hint_key;
  for (int c = 0; c < c_count; ++c) {
    w.value(static_cast<std::size_t>(c), static_cast<std::size_t>(1 + c)) += spec.value_gain;
    w.output(static_cast<std::size_t>(1 + c), static_cast<std::size_t>(c)) += 1.0;
  }

  for (int c = 0; c < c_count; ++c) {
    p.output_head(static_cast<std::size_t>(c), static_cast<std::size_t>(vocab::kLabelBase + c)) += spec.output_gain;
  }
  p.output_head(dim::kAnswered, vocab::kEnd) += spec.answer_gain;
  return p;
}

}  // namespace lorec::harness

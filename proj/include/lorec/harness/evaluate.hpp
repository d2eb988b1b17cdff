#pragma once

// Accuracy and macro-F1 over a synthetic task decoded by the engine.

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "lorec/config.hpp"
#include "lorec/engine.hpp"
#include "lorec/harness/task.hpp"

namespace lorec::harness {

struct ClassCounts {
  int true_positive = 0;
  int false_positive = 0;
  int false_negative = 0;
  int support = 0;  // gold instances of the class
};

struct EvalReport {
  int instances = 0;
  int correct = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassCounts> per_class;
  std::vector<int> predictions;  // class index, -1 when no label token was produced
  std::string config_fingerprint;
  double runtime_seconds = 0.0;
};

/// F1 is averaged over classes that occur as gold or as a prediction.
inline void score_predictions(const std::vector<int>& gold, const std::vector<int>& predicted, int classes,
                              EvalReport& report) {
  if (gold.size() != predicted.size()) throw ShapeError("score_predictions: length mismatch");
  report.instances = static_cast<int>(gold.size());
  report.per_class.assign(static_cast<std::size_t>(classes), {});
  report.correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto& g = report.per_class[static_cast<std::size_t>(gold[i])];
    ++g.support;
    if (predicted[i] == gold[i]) {
      ++report.correct;
      ++g.true_positive;
    } else {
      ++g.false_negative;
      if (predicted[i] >= 0 && predicted[i] < classes) ++report.per_class[static_cast<std::size_t>(predicted[i])].false_positive;
    }
  }
  report.accuracy = gold.empty() ? 0.0 : static_cast<double>(report.correct) / static_cast<double>(gold.size());
  double f1_sum = 0.0;
  int counted = 0;
  for (const auto& c : report.per_class) {
    const int denom = 2 * c.true_positive + c.false_positive + c.false_negative;
    if (denom == 0) continue;
    f1_sum += 2.0 * c.true_positive / denom;
    ++counted;
  }
  report.macro_f1 = counted == 0 ? 0.0 : f1_sum / counted;
}

/// FNV-1a over the config's canonical text.
inline std::string config_fingerprint(const LorecConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config.to_text()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = hex[h & 0xF];
  return s;
}

/// First generated token that is not a special token.
inline int first_content_token(const std::vector<int>& tokens) {
  for (int t : tokens) {
    if (!vocab::is_special(t)) return t;
  }
  return -1;
}

inline int token_to_class(int token, int classes) {
  if (token >= vocab::kLabelBase && token < vocab::kLabelBase + classes) return token - vocab::kLabelBase;
  return -1;
}

inline LorecConfig instance_config(const LorecConfig& config, std::size_t index) {
  LorecConfig c = config;
  c.seed = derive_seed(config.seed, 1000 + index);
  return c;
}

/// Per-instance outcome with its full trace.
struct InstanceRun {
  int predicted = -1;
  GenerationResult generation;
};

inline InstanceRun run_instance(const TaskInstance& inst, std::size_t index, const ModelParams& params,
                                const LorecConfig& config, int classes) {
  InstanceRun r;
  r.generation = generate(inst.graph, prompt_sequence(inst, params.dims.max_graph_tokens), params,
                          instance_config(config, index));
  r.predicted = token_to_class(first_content_token(r.generation.tokens), classes);
  return r;
}

/// Decodes every instance; work is split across threads but results are
/// stored by index, so the report does not depend on the thread count.
inline EvalReport evaluate(const SyntheticTask& task, const ModelParams& params, const LorecConfig& config,
                           unsigned threads = 1) {
  if (task.instances.empty()) throw DomainError("evaluate: empty task");
  config.validate(params.dims.layer_count, params.dims.vocab_size);
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = task.instances.size();
  std::vector<int> predicted(n, -1);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < n; i += stride) {
      predicted[i] = run_instance(task.instances[i], i, params, config, task.params.classes).predicted;
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }

  EvalReport report;
  std::vector<int> gold;
  for (const auto& inst : task.instances) gold.push_back(inst.gold_label);
  score_predictions(gold, predicted, task.params.classes, report);
  report.predictions = std::move(predicted);
  report.config_fingerprint = config_fingerprint(config);
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  // Accuracy must agree with the mean of per-instance correctness.
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += report.predictions[i] == gold[i] ? 1.0 : 0.0;
  mean /= static_cast<double>(n);
  if (mean != report.accuracy) throw InternalError("evaluate: accuracy cross-check failed");
  return report;
}

}  // namespace lorec::harness

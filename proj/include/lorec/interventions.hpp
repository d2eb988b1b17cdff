#pragma once

// Entropy-triggered attention rectification ("look") and graph re-injection
// into the FFN ("remember"), packaged as forward-pass hooks.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "lorec/config.hpp"
#include "lorec/errors.hpp"
#include "lorec/model.hpp"
#include "lorec/numerics.hpp"

namespace lorec {

/// Graph entries become e + eta * |e| when armed; everything else is left
/// untouched. The caller re-applies softmax.
inline Vector rectify_attention_row(std::span<const double> row, std::span<const std::size_t> graph_entries,
                                    double eta, bool armed) {
  if (!(eta >= 0.0)) throw ParameterError("rectify_attention_row: eta must be >= 0");
  Vector out(row.begin(), row.end());
  if (!armed) return out;
  for (std::size_t e : graph_entries) {
    if (e >= out.size()) throw IndexError("rectify_attention_row: graph index outside row");
    out[e] += eta * std::abs(out[e]);
  }
  return out;
}

struct TriggerResult {
  bool armed = false;
  std::optional<int> trigger_layer;
};

/// First layer whose entropy strictly exceeds gamma.
inline TriggerResult entropy_trigger(std::span<const double> layer_entropies, double gamma) {
  if (layer_entropies.empty()) throw DimensionError("entropy_trigger: no layers evaluated");
  for (std::size_t l = 0; l < layer_entropies.size(); ++l) {
    if (layer_entropies[l] > gamma) return {true, static_cast<int>(l)};
  }
  return {};
}

/// sum_j act(<x, g_j>) g_j over the rows g_j of graph_tokens.
inline Vector graph_memory(std::span<const double> x, const Matrix& graph_tokens, Activation act) {
  Vector out(x.size(), 0.0);
  for (std::size_t j = 0; j < graph_tokens.rows(); ++j) {
    const auto g = graph_tokens.row(j);
    if (g.size() != x.size()) throw ShapeError("graph_memory: token width differs from hidden size");
    const double coeff = activate(dot(x, g), act);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += coeff * g[c];
  }
  return out;
}

/// (1 - alpha) * ffn_out + alpha * graph_mem when fire is set.
inline Vector fuse_ffn(std::span<const double> ffn_out, std::span<const double> graph_mem, double alpha, bool fire) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("fuse_ffn: alpha must lie in [0, 1]");
  if (ffn_out.size() != graph_mem.size()) throw ShapeError("fuse_ffn: length mismatch");
  Vector out(ffn_out.begin(), ffn_out.end());
  if (!fire) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - alpha) * ffn_out[i] + alpha * graph_mem[i];
  return out;
}

/// Per-decoding-step hook state. Create a fresh instance for every step.
///
/// Sticky gating arms look at the first layer whose entropy exceeds gamma and
/// rectifies every later layer inside the look range; per-layer gating
/// rectifies exactly the in-range layers whose own entropy exceeds gamma.
/// Remember fires once, at the first in-range layer whose entropy exceeds
/// gamma.
class InterventionHooks final : public ForwardHooks {
 public:
  InterventionHooks(const LorecConfig& config, const Matrix& graph_tokens, int layer_count, Activation act)
      : config_(config), graph_tokens_(graph_tokens), layer_count_(layer_count), act_(act) {
    look_range_ = config_.look_layers.resolve(layer_count_);
    remember_range_ = config_.remember_layers.resolve(layer_count_);
  }

  bool look_before(int layer) override {
    if (!config_.enable_look || config_.look_gating != LookGating::sticky) return false;
    return look_armed_ && trigger_layer_.value_or(layer) < layer && in(look_range_, layer);
  }

  Revision after_layer(int layer, double entropy, bool look_applied) override {
    Revision rev;
    const bool uncertain = entropy > config_.gamma;
    if (uncertain && !trigger_layer_) {
      trigger_layer_ = layer;
      look_armed_ = config_.enable_look;
    }
    if (config_.enable_look && config_.look_gating == LookGating::per_layer && uncertain &&
        !look_applied && in(look_range_, layer)) {
      rev.look = true;
    }
    if (config_.enable_remember && !remember_fired_ && uncertain && in(remember_range_, layer)) {
      remember_fired_ = true;
      remember_layer_ = layer;
      rev.remember = true;
    }
    return rev;
  }

  void rectify(std::span<double> row, std::span<const std::size_t> graph_entries) override {
    const Vector r = rectify_attention_row(row, graph_entries, config_.eta, true);
    std::copy(r.begin(), r.end(), row.begin());
  }

  Vector fuse(std::span<const double> ffn_out, std::span<const double> x) override {
    return fuse_ffn(ffn_out, graph_memory(x, graph_tokens_, act_), config_.alpha, true);
  }

  bool look_armed() const noexcept { return look_armed_; }
  bool remember_fired() const noexcept { return remember_fired_; }
  std::optional<int> trigger_layer() const noexcept { return trigger_layer_; }
  std::optional<int> remember_layer() const noexcept { return remember_layer_; }

 private:
  static bool in(std::pair<int, int> r, int layer) { return layer >= r.first && layer <= r.second; }

  const LorecConfig& config_;
  const Matrix& graph_tokens_;
  int layer_count_;
  Activation act_;
  std::pair<int, int> look_range_;
  std::pair<int, int> remember_range_;
  bool look_armed_ = false;
  bool remember_fired_ = false;
  std::optional<int> trigger_layer_;
  std::optional<int> remember_layer_;
};

}  // namespace lorec

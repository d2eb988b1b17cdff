#pragma once

// End-to-end decoding: one perturbed graph view per generation, then per step
// an intervened original pass, the text-only and perturbed-graph passes,
// contrastive combination, the plausibility constraint and token selection.

#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lorec/config.hpp"
#include "lorec/contrast.hpp"
#include "lorec/graph.hpp"
#include "lorec/interventions.hpp"
#include "lorec/model.hpp"
#include "lorec/numerics.hpp"
#include "lorec/random.hpp"
#include "lorec/text_io.hpp"

namespace lorec {

struct LayerTrace {
  int layer = 0;
  double entropy = 0.0;
  bool look_applied = false;
  bool remember_fired = false;
  // Head-averaged last-position attention, bucketed by segment.
  double graph_mass = 0.0;
  double text_mass = 0.0;
  double generated_mass = 0.0;
  // Graph mass of the same rows before rectification.
  double raw_graph_mass = 0.0;
  // Every graph entry of every head's pre-rectification row is > 0.
  bool graph_logits_positive = false;
  // Largest |sum - 1| over the per-head attention rows.
  double row_sum_error = 0.0;

  friend bool operator==(const LayerTrace&, const LayerTrace&) = default;
};

struct StepTrace {
  int step = 0;
  std::vector<LayerTrace> layers;
  std::optional<int> trigger_layer;
  std::optional<int> remember_layer;
  bool gate = false;
  int forward_passes = 0;
  Vector psi_orig, psi_text, psi_aug, psi_final;  // empty when snapshots are off
  std::vector<std::size_t> candidates;
  int token = -1;

  friend bool operator==(const StepTrace&, const StepTrace&) = default;
};

struct DecodeTrace {
  std::uint64_t seed = 0;
  int dropped_edge_count = 0;
  bool gate = false;
  Vector edge_drop_probs;
  std::vector<StepTrace> steps;

  friend bool operator==(const DecodeTrace&, const DecodeTrace&) = default;
};

struct GenerationResult {
  std::vector<int> tokens;
  DecodeTrace trace;
};

inline ForwardOptions forward_options(const LorecConfig& config) {
  ForwardOptions o;
  o.graph_scale = config.graph_scale;
  o.text_scale = config.text_scale;
  o.entropy_top_n = config.entropy_top_n;
  o.entropy_renormalize = config.entropy_renormalize;
  return o;
}

namespace detail {

inline LayerTrace summarize_layer(int layer, const LayerRecord& rec, const LayerActivations& act,
                                  const TokenSequence& seq) {
  LayerTrace lt;
  lt.layer = layer;
  lt.entropy = rec.entropy;
  lt.look_applied = rec.look_applied;
  lt.remember_fired = rec.remember_fired;
  const auto& seg = seq.segments();
  const auto& vis = act.visible_positions;
  const std::size_t heads = rec.attention_weights.size();
  bool positive = false;
  bool any_graph = false;
  for (std::size_t e = 0; e < vis.size(); ++e) any_graph = any_graph || seg[vis[e]] == Segment::graph;
  if (any_graph) positive = true;
  for (std::size_t h = 0; h < heads; ++h) {
    const auto& w = rec.attention_weights[h];
    const Vector raw = softmax(rec.raw_attention_logits[h]);
    double sum = 0.0;
    for (std::size_t e = 0; e < vis.size(); ++e) {
      const double p = w[e] / static_cast<double>(heads);
      sum += w[e];
      switch (seg[vis[e]]) {
        case Segment::graph:
          lt.graph_mass += p;
          lt.raw_graph_mass += raw[e] / static_cast<double>(heads);
          if (!(rec.raw_attention_logits[h][e] > 0.0)) positive = false;
          break;
        case Segment::text: lt.text_mass += p; break;
        case Segment::generated: lt.generated_mass += p; break;
      }
    }
    lt.row_sum_error = std::max(lt.row_sum_error, std::abs(sum - 1.0));
  }
  lt.graph_logits_positive = positive;
  return lt;
}

}  // namespace detail

/// Decodes up to max_new_tokens after the prompt. The prompt's graph slots
/// must match the number of graph tokens the encoder yields for g.
inline GenerationResult generate(const Graph& g, const TokenSequence& prompt, const ModelParams& params,
                                 const LorecConfig& config) {
  config.validate(params.dims.layer_count, params.dims.vocab_size);
  const Matrix graph_tokens = encode_graph(g, params);
  if (prompt.graph_count() != graph_tokens.rows()) {
    throw ShapeError("generate: prompt has " + std::to_string(prompt.graph_count()) + " graph slots, encoder yields " +
                     std::to_string(graph_tokens.rows()));
  }

  GenerationResult out;
  DecodeTrace& trace = out.trace;
  trace.seed = config.seed;
  Rng augment_rng(derive_seed(config.seed, 0));
  Rng sample_rng(derive_seed(config.seed, 1));

  Matrix aug_tokens;
  if (config.enable_contrast && !g.edges().empty()) {
    const AugmentResult aug = augment(g, config, augment_rng);
    trace.dropped_edge_count = aug.dropped_edge_count;
    trace.edge_drop_probs = aug.per_edge_drop_prob;
    trace.gate = contrast_gate(g, aug, config.edge_threshold);
    if (trace.gate) aug_tokens = encode_graph(aug.augmented_graph, params);
  }

  const bool intervene = config.enable_look || config.enable_remember;
  const ForwardOptions fopts = forward_options(config);
  const int layers = params.dims.layer_count;
  TokenSequence seq = prompt;

  for (int step = 0; step < config.max_new_tokens; ++step) {
    StepTrace st;
    st.step = step;
    st.gate = trace.gate;

    std::optional<InterventionHooks> hooks;
    if (intervene) hooks.emplace(config, graph_tokens, layers, params.dims.activation);
    const LayerActivations orig = forward_step(seq, graph_tokens, params, hooks ? &*hooks : nullptr, fopts);
    st.forward_passes = 1;
    if (hooks) {
      st.trigger_layer = hooks->trigger_layer();
      st.remember_layer = hooks->remember_layer();
    } else {
      Vector entropies;
      for (const auto& rec : orig.layers) entropies.push_back(rec.entropy);
      st.trigger_layer = entropy_trigger(entropies, config.gamma).trigger_layer;
    }
    for (int l = 0; l < layers; ++l) {
      st.layers.push_back(detail::summarize_layer(l, orig.layers[static_cast<std::size_t>(l)], orig, seq));
    }

    LogitTriple triple;
    triple.psi_orig = orig.final_logits;
    Vector final_logits = orig.final_logits;
    if (config.enable_contrast) {
      const bool all_passes = intervene && config.interventions_on_all_passes;
      {
        ForwardOptions topts = fopts;
        topts.mask_graph = true;
        std::optional<InterventionHooks> th;
        if (all_passes) th.emplace(config, graph_tokens, layers, params.dims.activation);
        triple.psi_text = forward_step(seq, graph_tokens, params, th ? &*th : nullptr, topts).final_logits;
        ++st.forward_passes;
      }
      triple.gate = trace.gate;
      if (trace.gate) {
        std::optional<InterventionHooks> ah;
        if (all_passes) ah.emplace(config, aug_tokens, layers, params.dims.activation);
        triple.psi_aug = forward_step(seq, aug_tokens, params, ah ? &*ah : nullptr, fopts).final_logits;
        ++st.forward_passes;
      }
      final_logits = combine_logits(triple, config.omega, config.beta);
    }

    st.candidates = plausibility_set(orig.final_logits, config.kappa);
    st.token = select_token(final_logits, st.candidates, config.decode_mode, sample_rng);
    if (config.record_snapshots) {
      st.psi_orig = std::move(triple.psi_orig);
      st.psi_text = std::move(triple.psi_text);
      st.psi_aug = std::move(triple.psi_aug);
      st.psi_final = final_logits;
    }
    const int token = st.token;
    trace.steps.push_back(std::move(st));
    out.tokens.push_back(token);
    if (token == config.end_token) break;
    seq.append_generated(token);
  }
  return out;
}

struct MassCell {
  int step = 0;
  int layer = 0;
  double graph = 0.0;
  double text = 0.0;
  double generated = 0.0;
};

/// Head-averaged last-position attention split by segment, per (step, layer).
inline std::vector<MassCell> attention_mass_report(const DecodeTrace& trace) {
  if (trace.steps.empty()) throw DomainError("attention_mass_report: empty trace");
  std::vector<MassCell> cells;
  for (const auto& st : trace.steps) {
    for (const auto& lt : st.layers) cells.push_back({st.step, lt.layer, lt.graph_mass, lt.text_mass, lt.generated_mass});
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Trace CSV export. Two tables:
//   layers: step,layer,entropy,triggered,look_applied,remember_fired,
//           graph_mass,text_mass,generated_mass
//   steps:  step,token,trigger_layer,remember_layer,gate,forward_passes,
//           candidate_count,orig_argmax,orig_max,text_argmax,aug_argmax,
//           final_argmax,final_max
// Booleans are 0/1; absent layers and argmaxes are -1; reals use the
// shortest round-trip decimal form.

inline constexpr const char* kLayerCsvHeader =
    "step,layer,entropy,triggered,look_applied,remember_fired,graph_mass,text_mass,generated_mass";
inline constexpr const char* kStepCsvHeader =
    "step,token,trigger_layer,remember_layer,gate,forward_passes,candidate_count,orig_argmax,orig_max,"
    "text_argmax,aug_argmax,final_argmax,final_max";

struct LayerCsvRow {
  int step = 0, layer = 0;
  double entropy = 0.0;
  bool triggered = false, look_applied = false, remember_fired = false;
  double graph_mass = 0.0, text_mass = 0.0, generated_mass = 0.0;
  friend bool operator==(const LayerCsvRow&, const LayerCsvRow&) = default;
};

struct StepCsvRow {
  int step = 0, token = 0, trigger_layer = -1, remember_layer = -1;
  bool gate = false;
  int forward_passes = 0, candidate_count = 0, orig_argmax = -1;
  double orig_max = 0.0;
  int text_argmax = -1, aug_argmax = -1, final_argmax = -1;
  double final_max = 0.0;
  friend bool operator==(const StepCsvRow&, const StepCsvRow&) = default;
};

inline std::vector<LayerCsvRow> layer_rows(const DecodeTrace& trace, double gamma) {
  std::vector<LayerCsvRow> rows;
  for (const auto& st : trace.steps) {
    for (const auto& lt : st.layers) {
      rows.push_back({st.step, lt.layer, lt.entropy, lt.entropy > gamma, lt.look_applied, lt.remember_fired,
                      lt.graph_mass, lt.text_mass, lt.generated_mass});
    }
  }
  return rows;
}

inline std::vector<StepCsvRow> step_rows(const DecodeTrace& trace) {
  auto amax = [](const Vector& v) { return v.empty() ? -1 : static_cast<int>(argmax(v)); };
  auto vmax = [](const Vector& v) { return v.empty() ? 0.0 : v[argmax(v)]; };
  std::vector<StepCsvRow> rows;
  for (const auto& st : trace.steps) {
    rows.push_back({st.step, st.token, st.trigger_layer.value_or(-1), st.remember_layer.value_or(-1), st.gate,
                    st.forward_passes, static_cast<int>(st.candidates.size()), amax(st.psi_orig), vmax(st.psi_orig),
                    amax(st.psi_text), amax(st.psi_aug), amax(st.psi_final), vmax(st.psi_final)});
  }
  return rows;
}

inline void write_layer_csv(std::ostream& os, const std::vector<LayerCsvRow>& rows) {
  os << kLayerCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.step << ',' << r.layer << ',' << text::format_double(r.entropy) << ',' << int(r.triggered) << ','
       << int(r.look_applied) << ',' << int(r.remember_fired) << ',' << text::format_double(r.graph_mass) << ','
       << text::format_double(r.text_mass) << ',' << text::format_double(r.generated_mass) << '\n';
  }
}

inline void write_step_csv(std::ostream& os, const std::vector<StepCsvRow>& rows) {
  os << kStepCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.step << ',' << r.token << ',' << r.trigger_layer << ',' << r.remember_layer << ',' << int(r.gate) << ','
       << r.forward_passes << ',' << r.candidate_count << ',' << r.orig_argmax << ','
       << text::format_double(r.orig_max) << ',' << r.text_argmax << ',' << r.aug_argmax << ',' << r.final_argmax
       << ',' << text::format_double(r.final_max) << '\n';
  }
}

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(std::istream& is, const char* header, std::size_t columns) {
  std::string line;
  if (!std::getline(is, line) || text::trim(line) != header) throw FormatError("csv: unexpected header");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(text::trim(line), ',');
    if (cells.size() != columns) throw FormatError("csv: wrong column count");
    rows.emplace_back(cells.begin(), cells.end());
  }
  return rows;
}

inline bool parse_flag(const std::string& s) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw FormatError("csv: expected 0/1, got '" + s + "'");
}

}  // namespace detail

inline std::vector<LayerCsvRow> read_layer_csv(std::istream& is) {
  std::vector<LayerCsvRow> out;
  for (const auto& c : detail::read_csv(is, kLayerCsvHeader, 9)) {
    out.push_back({static_cast<int>(text::parse_int(c[0])), static_cast<int>(text::parse_int(c[1])),
                   text::parse_double(c[2]), detail::parse_flag(c[3]), detail::parse_flag(c[4]),
                   detail::parse_flag(c[5]), text::parse_double(c[6]), text::parse_double(c[7]),
                   text::parse_double(c[8])});
  }
  return out;
}

inline std::vector<StepCsvRow> read_step_csv(std::istream& is) {
  std::vector<StepCsvRow> out;
  auto i = [](const std::string& s) { return static_cast<int>(text::parse_int(s)); };
  for (const auto& c : detail::read_csv(is, kStepCsvHeader, 13)) {
    out.push_back({i(c[0]), i(c[1]), i(c[2]), i(c[3]), detail::parse_flag(c[4]), i(c[5]), i(c[6]), i(c[7]),
                   text::parse_double(c[8]), i(c[9]), i(c[10]), i(c[11]), text::parse_double(c[12])});
  }
  return out;
}

}  // namespace lorec

#pragma once

// Decoding hyperparameters and their flat key-value text form.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lorec/errors.hpp"
#include "lorec/text_io.hpp"

namespace lorec {

enum class DecodeMode { greedy, sample };
enum class AugmentOrientation { as_written, prose };
enum class LookGating { sticky, per_layer };

/// Inclusive layer interval, stored either as fractions of the layer count or
/// as absolute indices.
struct LayerRange {
  bool fractional = true;
  double lo = 0.0;
  double hi = 0.0;

  static LayerRange fraction(double lo, double hi) { return {true, lo, hi}; }
  static LayerRange absolute(int lo, int hi) { return {false, double(lo), double(hi)}; }

  // Fractions map by rounding: [0.47, 0.69] of 32 layers gives 15..22.
  std::pair<int, int> resolve(int layer_count) const {
    int first = 0;
    int last = 0;
    if (fractional) {
      first = static_cast<int>(std::lround(lo * layer_count));
      last = static_cast<int>(std::lround(hi * layer_count));
    } else {
      first = static_cast<int>(lo);
      last = static_cast<int>(hi);
    }
    if (first < 0 || last >= layer_count || first > last) {
      throw ConfigError("layer range resolves to [" + std::to_string(first) + ", " +
                        std::to_string(last) + "] outside [0, " + std::to_string(layer_count) +
                        ")");
    }
    return {first, last};
  }

  bool contains(int layer, int layer_count) const {
    const auto [first, last] = resolve(layer_count);
    return layer >= first && layer <= last;
  }

  std::string to_string() const {
    if (fractional) return "frac " + text::format_double(lo) + " " + text::format_double(hi);
    return "abs " + std::to_string(static_cast<int>(lo)) + " " +
           std::to_string(static_cast<int>(hi));
  }

  static LayerRange parse(std::string_view s) {
    const auto parts = text::split_ws(s);
    if (parts.size() != 3 || (parts[0] != "frac" && parts[0] != "abs")) {
      throw ConfigError("layer range must be 'frac LO HI' or 'abs LO HI', got '" +
                        std::string(s) + "'");
    }
    if (parts[0] == "frac") return fraction(text::parse_double(parts[1]), text::parse_double(parts[2]));
    return absolute(static_cast<int>(text::parse_int(parts[1])),
                    static_cast<int>(text::parse_int(parts[2])));
  }

  friend bool operator==(const LayerRange&, const LayerRange&) = default;
};

/// Every decoding hyperparameter. Defaults follow the GraphGPT/Arxiv profile:
/// mu 0.2, tau 0.7, omega 0.5, beta 1.0, eta 0.2, alpha 0.25, entropy
/// threshold 0.75, edge threshold 10, plausibility 1.0.
struct LorecConfig {
  double gamma = 0.75;   // entropy threshold
  double eta = 0.2;      // attention amplification
  double alpha = 0.25;   // graph memory injection ratio
  double omega = 0.5;    // text contrast weight
  double beta = 1.0;     // graph contrast weight
  double mu = 0.2;       // edge drop rate
  double tau = 0.7;      // drop probability cap
  double kappa = 1.0;    // plausibility ratio
  int edge_threshold = 10;
  double epsilon_degree = 1.0;

  LayerRange look_layers = LayerRange::fraction(0.47, 0.69);
  LayerRange remember_layers = LayerRange::fraction(0.25, 0.50);

  int entropy_top_n = 0;  // 0 means the full vocabulary
  bool entropy_renormalize = true;

  int max_new_tokens = 8;
  int end_token = 2;  // negative disables end-token stopping
  DecodeMode decode_mode = DecodeMode::greedy;
  std::uint64_t seed = 0;

  AugmentOrientation augment_orientation = AugmentOrientation::as_written;
  LookGating look_gating = LookGating::sticky;

  bool enable_look = true;
  bool enable_remember = true;
  bool enable_contrast = true;
  bool interventions_on_all_passes = false;
  bool record_snapshots = true;

  // Embedding multipliers for the feature-scaling probe.
  double graph_scale = 1.0;
  double text_scale = 1.0;

  friend bool operator==(const LorecConfig&, const LorecConfig&) = default;

  void validate() const {
    auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    auto non_negative = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!in_unit(gamma)) throw ConfigError("gamma must lie in [0, 1]");
    if (!non_negative(eta)) throw ConfigError("eta must be >= 0");
    if (!in_unit(alpha)) throw ConfigError("alpha must lie in [0, 1]");
    if (!non_negative(omega)) throw ConfigError("omega must be >= 0");
    if (!non_negative(beta)) throw ConfigError("beta must be >= 0");
    if (!in_unit(mu)) throw ConfigError("mu must lie in [0, 1]");
    if (!in_unit(tau)) throw ConfigError("tau must lie in [0, 1]");
    if (!(std::isfinite(kappa) && kappa > 0.0 && kappa <= 1.0)) {
      throw ConfigError("kappa must lie in (0, 1]");
    }
    if (edge_threshold < 0) throw ConfigError("edge_threshold must be >= 0");
    if (!(std::isfinite(epsilon_degree) && epsilon_degree > 0.0)) {
      throw ConfigError("epsilon_degree must be > 0");
    }
    if (entropy_top_n < 0 || entropy_top_n == 1) {
      throw ConfigError("entropy_top_n must be 0 (full vocabulary) or >= 2");
    }
    if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
    if (!non_negative(graph_scale) || !non_negative(text_scale)) {
      throw ConfigError("feature scales must be finite and >= 0");
    }
    for (const auto* r : {&look_layers, &remember_layers}) {
      if (r->fractional && !(r->lo >= 0.0 && r->hi <= 1.0 && r->lo <= r->hi)) {
        throw ConfigError("fractional layer range must satisfy 0 <= lo <= hi <= 1");
      }
    }
  }

  // Validates against a concrete model depth.
  void validate(int layer_count, int vocab_size) const {
    validate();
    look_layers.resolve(layer_count);
    remember_layers.resolve(layer_count);
    if (entropy_top_n > vocab_size) throw ConfigError("entropy_top_n exceeds vocabulary size");
  }

  /// Applies one key-value pair; returns false when the key is not a decoding
  /// key (the harness owns the remaining namespaces).
  bool set(std::string_view key, std::string_view value) {
    const std::string k = canonical_key(key);
    auto flag = [&](bool& dst) {
      if (value == "true" || value == "1") dst = true;
      else if (value == "false" || value == "0") dst = false;
      else throw ConfigError("expected true/false for '" + k + "'");
    };
    try {
      if (k == "gamma") gamma = text::parse_double(value);
      else if (k == "eta") eta = text::parse_double(value);
      else if (k == "alpha") alpha = text::parse_double(value);
      else if (k == "omega") omega = text::parse_double(value);
      else if (k == "beta") beta = text::parse_double(value);
      else if (k == "mu") mu = text::parse_double(value);
      else if (k == "tau") tau = text::parse_double(value);
      else if (k == "kappa") kappa = text::parse_double(value);
      else if (k == "edge_threshold") edge_threshold = static_cast<int>(text::parse_int(value));
      else if (k == "epsilon_degree") epsilon_degree = text::parse_double(value);
      else if (k == "look_layers") look_layers = LayerRange::parse(value);
      else if (k == "remember_layers") remember_layers = LayerRange::parse(value);
      else if (k == "entropy_top_n") entropy_top_n = static_cast<int>(text::parse_int(value));
      else if (k == "entropy_renormalize") flag(entropy_renormalize);
      else if (k == "max_new_tokens") max_new_tokens = static_cast<int>(text::parse_int(value));
      else if (k == "end_token") end_token = static_cast<int>(text::parse_int(value));
      else if (k == "decode_mode") {
        if (value == "greedy") decode_mode = DecodeMode::greedy;
        else if (value == "sample") decode_mode = DecodeMode::sample;
        else throw ConfigError("decode_mode must be greedy or sample");
      } else if (k == "seed") seed = static_cast<std::uint64_t>(text::parse_int(value));
      else if (k == "augment_orientation") {
        if (value == "as_written") augment_orientation = AugmentOrientation::as_written;
        else if (value == "prose") augment_orientation = AugmentOrientation::prose;
        else throw ConfigError("augment_orientation must be as_written or prose");
      } else if (k == "look_gating") {
        if (value == "sticky") look_gating = LookGating::sticky;
        else if (value == "per_layer") look_gating = LookGating::per_layer;
        else throw ConfigError("look_gating must be sticky or per_layer");
      } else if (k == "enable_look") flag(enable_look);
      else if (k == "enable_remember") flag(enable_remember);
      else if (k == "enable_contrast") flag(enable_contrast);
      else if (k == "interventions_on_all_passes") flag(interventions_on_all_passes);
      else if (k == "record_snapshots") flag(record_snapshots);
      else if (k == "graph_scale") graph_scale = text::parse_double(value);
      else if (k == "text_scale") text_scale = text::parse_double(value);
      else return false;
    } catch (const FormatError& e) {
      throw ConfigError("bad value for '" + k + "': " + e.what());
    }
    return true;
  }

  std::string to_text() const {
    std::ostringstream os;
    auto b = [](bool v) { return v ? "true" : "false"; };
    os << "gamma = " << text::format_double(gamma) << "\n"
       << "eta = " << text::format_double(eta) << "\n"
       << "alpha = " << text::format_double(alpha) << "\n"
       << "omega = " << text::format_double(omega) << "\n"
       << "beta = " << text::format_double(beta) << "\n"
       << "mu = " << text::format_double(mu) << "\n"
       << "tau = " << text::format_double(tau) << "\n"
       << "kappa = " << text::format_double(kappa) << "\n"
       << "edge_threshold = " << edge_threshold << "\n"
       << "epsilon_degree = " << text::format_double(epsilon_degree) << "\n"
       << "look_layers = " << look_layers.to_string() << "\n"
       << "remember_layers = " << remember_layers.to_string() << "\n"
       << "entropy_top_n = " << entropy_top_n << "\n"
       << "entropy_renormalize = " << b(entropy_renormalize) << "\n"
       << "max_new_tokens = " << max_new_tokens << "\n"
       << "end_token = " << end_token << "\n"
       << "decode_mode = " << (decode_mode == DecodeMode::greedy ? "greedy" : "sample") << "\n"
       << "seed = " << seed << "\n"
       << "augment_orientation = "
       << (augment_orientation == AugmentOrientation::as_written ? "as_written" : "prose") << "\n"
       << "look_gating = " << (look_gating == LookGating::sticky ? "sticky" : "per_layer") << "\n"
       << "enable_look = " << b(enable_look) << "\n"
       << "enable_remember = " << b(enable_remember) << "\n"
       << "enable_contrast = " << b(enable_contrast) << "\n"
       << "interventions_on_all_passes = " << b(interventions_on_all_passes) << "\n"
       << "record_snapshots = " << b(record_snapshots) << "\n"
       << "graph_scale = " << text::format_double(graph_scale) << "\n"
       << "text_scale = " << text::format_double(text_scale) << "\n";
    return os.str();
  }

  // Greek-letter and table-style aliases map onto field names.
  static std::string canonical_key(std::string_view key) {
    static const std::map<std::string, std::string, std::less<>> aliases = {
        {"γ", "gamma"}, {"η", "eta"},   {"α", "alpha"}, {"ω", "omega"},
        {"β", "beta"},  {"μ", "mu"},    {"τ", "tau"},   {"κ", "kappa"},
        {"ε", "epsilon_degree"},        {"entropy_threshold", "gamma"},
        {"epsilon", "epsilon_degree"},  {"entropy threshold", "gamma"},
        {"edge threshold", "edge_threshold"},
    };
    const auto it = aliases.find(key);
    return it == aliases.end() ? std::string(key) : it->second;
  }
};

/// Parses `key = value` lines; '#' starts a comment. Later keys win.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  int line_no = 0;
  for (auto line : text::split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = text::trim(line.substr(0, eq));
    const auto value = text::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::string(key), std::string(value));
  }
  return out;
}

inline LorecConfig parse_lorec_config(std::string_view text) {
  LorecConfig cfg;
  for (const auto& [k, v] : parse_key_values(text)) {
    if (!cfg.set(k, v)) throw ConfigError("unknown config key '" + k + "'");
  }
  cfg.validate();
  return cfg;
}

}  // namespace lorec

#pragma once

// Harness configuration file and the deterministic output files of `run`.
//
// Keys without a namespace are decoding keys. The harness adds
//   task.*      synthetic task generator
//   model.*     model source and the reference model's strengths
//   run.*       evaluation options
//   diagnose.*  probe options

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lorec/config.hpp"
#include "lorec/engine.hpp"
#include "lorec/harness/evaluate.hpp"
#include "lorec/harness/task.hpp"
#include "lorec/model.hpp"

namespace lorec::harness {

enum class ModelSource { reference, random, checkpoint };

struct ScalePair {
  double graph = 1.0;
  double text = 1.0;
  friend bool operator==(const ScalePair&, const ScalePair&) = default;
};

struct HarnessConfig {
  LorecConfig decode;
  TaskParams task;
  ReferenceModelSpec model;
  ModelSource source = ModelSource::reference;
  std::string checkpoint;  // path, for source = checkpoint
  std::uint64_t random_seed = 1;
  int threads = 1;
  int trace_instances = 1;
  int diagnose_instances = 50;
  std::vector<ScalePair> scales = {{1, 1}, {0.5, 1}, {2, 1}, {1, 0.5}, {1, 2}};

  friend bool operator==(const HarnessConfig&, const HarnessConfig&) = default;

  void validate() const {
    decode.validate();
    task.validate();
    if (model.classes != task.classes) throw ConfigError("model.classes must equal task.classes");
    if (source == ModelSource::checkpoint && checkpoint.empty()) throw ConfigError("model.checkpoint is empty");
    if (threads < 1) throw ConfigError("run.threads must be >= 1");
    if (trace_instances < 0) throw ConfigError("run.trace_instances must be >= 0");
    if (diagnose_instances < 1) throw ConfigError("diagnose.instances must be >= 1");
    if (scales.empty()) throw ConfigError("diagnose.scales is empty");
    for (const auto& s : scales) {
      if (!(s.graph >= 0.0 && s.text >= 0.0)) throw ConfigError("diagnose.scales must be >= 0");
    }
  }

  /// Sets the decoding seed and the task seed together.
  void set_seed(std::uint64_t seed) {
    decode.seed = seed;
    task.seed = seed;
  }
};

inline std::vector<ScalePair> parse_scales(std::string_view v) {
  std::vector<ScalePair> out;
  for (auto item : text::split_ws(v)) {
    const auto parts = text::split(item, ':');
    if (parts.size() != 2) throw ConfigError("diagnose.scales entries look like GRAPH:TEXT");
    out.push_back({text::parse_double(parts[0]), text::parse_double(parts[1])});
  }
  return out;
}

namespace detail {

inline bool set_harness_key(HarnessConfig& h, const std::string& k, const std::string& v) {
  auto i = [&] { return static_cast<int>(text::parse_int(v)); };
  auto d = [&] { return text::parse_double(v); };
  auto u = [&] { return static_cast<std::uint64_t>(text::parse_int(v)); };
  TaskParams& t = h.task;
  ReferenceModelSpec& m = h.model;
  if (k == "task.instances") t.instances = i();
  else if (k == "task.classes") t.classes = m.classes = i();
  else if (k == "task.min_extra_nodes") t.min_extra_nodes = i();
  else if (k == "task.max_extra_nodes") t.max_extra_nodes = i();
  else if (k == "task.min_hints") t.min_hints = i();
  else if (k == "task.max_hints") t.max_hints = i();
  else if (k == "task.min_fillers") t.min_fillers = i();
  else if (k == "task.max_fillers") t.max_fillers = i();
  else if (k == "task.misleading_rate") t.misleading_rate = d();
  else if (k == "task.feature_dim") t.feature_dim = i();
  else if (k == "task.seed") t.seed = u();
  else if (k == "model.source") {
    if (v == "reference") h.source = ModelSource::reference;
    else if (v == "random") h.source = ModelSource::random;
    else if (v == "checkpoint") h.source = ModelSource::checkpoint;
    else throw ConfigError("model.source must be reference, random or checkpoint");
  } else if (k == "model.checkpoint") h.checkpoint = v;
  else if (k == "model.random_seed") h.random_seed = u();
  else if (k == "model.readout_layer") m.readout_layer = i();
  else if (k == "model.hint_label") m.hint_label = d();
  else if (k == "model.graph_label") m.graph_label = d();
  else if (k == "model.query_gain") m.query_gain = d();
  else if (k == "model.graph_key") m.graph_key = d();
  else if (k == "model.hint_key") m.hint_key = d();
  else if (k == "model.value_gain") m.value_gain = d();
  else if (k == "model.output_gain") m.output_gain = d();
  else if (k == "model.answer_gain") m.answer_gain = d();
  else if (k == "model.memory_key") m.memory_key = d();
  else if (k == "model.noise") m.noise = d();
  else if (k == "model.seed") m.seed = u();
  else if (k == "run.threads") h.threads = i();
  else if (k == "run.trace_instances") h.trace_instances = i();
  else if (k == "diagnose.instances") h.diagnose_instances = i();
  else if (k == "diagnose.scales") h.scales = parse_scales(v);
  else return false;
  return true;
}

}  // namespace detail

inline HarnessConfig parse_harness_config(std::string_view text) {
  HarnessConfig h;
  for (const auto& [k, v] : parse_key_values(text)) {
    try {
      if (h.decode.set(k, v)) continue;
      if (!detail::set_harness_key(h, k, v)) throw ConfigError("unknown config key '" + k + "'");
    } catch (const FormatError& e) {
      throw ConfigError("bad value for '" + k + "': " + e.what());
    }
  }
  h.validate();
  return h;
}

inline HarnessConfig load_harness_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_harness_config(ss.str());
}

inline std::string to_text(const HarnessConfig& h) {
  std::ostringstream os;
  os << "# decoding\n" << h.decode.to_text() << "# task\n";
  const TaskParams& t = h.task;
  os << "task.instances = " << t.instances << "\ntask.classes = " << t.classes
     << "\ntask.min_extra_nodes = " << t.min_extra_nodes << "\ntask.max_extra_nodes = " << t.max_extra_nodes
     << "\ntask.min_hints = " << t.min_hints << "\ntask.max_hints = " << t.max_hints
     << "\ntask.min_fillers = " << t.min_fillers << "\ntask.max_fillers = " << t.max_fillers
     << "\ntask.misleading_rate = " << text::format_double(t.misleading_rate)
     << "\ntask.feature_dim = " << t.feature_dim << "\ntask.seed = " << t.seed << "\n# model\n";
  const ReferenceModelSpec& m = h.model;
  static const char* sources[] = {"reference", "random", "checkpoint"};
  os << "model.source = " << sources[static_cast<int>(h.source)] << '\n';
  if (!h.checkpoint.empty()) os << "model.checkpoint = " << h.checkpoint << '\n';
  os << "model.random_seed = " << h.random_seed << "\nmodel.readout_layer = " << m.readout_layer
     << "\nmodel.hint_label = " << text::format_double(m.hint_label)
     << "\nmodel.graph_label = " << text::format_double(m.graph_label)
     << "\nmodel.query_gain = " << text::format_double(m.query_gain)
     << "\nmodel.graph_key = " << text::format_double(m.graph_key)
     << "\nmodel.hint_key = " << text::format_double(m.hint_key)
     << "\nmodel.value_gain = " << text::format_double(m.value_gain)
     << "\nmodel.output_gain = " << text::format_double(m.output_gain)
     << "\nmodel.answer_gain = " << text::format_double(m.answer_gain)
     << "\nmodel.memory_key = " << text::format_double(m.memory_key)
     << "\nmodel.noise = " << text::format_double(m.noise) << "\nmodel.seed = " << m.seed << "\n# run\n"
     << "run.threads = " << h.threads << "\nrun.trace_instances = " << h.trace_instances << "\n# diagnose\n"
     << "diagnose.instances = " << h.diagnose_instances << "\ndiagnose.scales =";
  for (const auto& s : h.scales) os << ' ' << text::format_double(s.graph) << ':' << text::format_double(s.text);
  os << '\n';
  return os.str();
}

inline ModelParams build_model(const HarnessConfig& h) {
  ModelParams p;
  switch (h.source) {
    case ModelSource::reference: p = reference_model(h.model, h.task.feature_dim); break;
    case ModelSource::random: p = random_params(reference_dims(h.task.feature_dim), h.random_seed); break;
    case ModelSource::checkpoint: {
      std::ifstream in(h.checkpoint);
      if (!in) throw ConfigError("cannot open checkpoint " + h.checkpoint);
      p = read_checkpoint(in);
      break;
    }
  }
  if (p.dims.feature_dim != h.task.feature_dim) throw ConfigError("model feature_dim differs from task.feature_dim");
  if (p.dims.vocab_size < vocab::kMinSize) throw ConfigError("model vocabulary too small for the task");
  h.decode.validate(p.dims.layer_count, p.dims.vocab_size);
  return p;
}

/// Applies a --stages selection such as "look,contrast". An empty string
/// disables every stage.
inline void apply_stages(LorecConfig& c, std::string_view stages) {
  c.enable_look = c.enable_remember = c.enable_contrast = false;
  for (auto s : text::split(stages, ',')) {
    s = text::trim(s);
    if (s.empty() || s == "none") continue;
    if (s == "look") c.enable_look = true;
    else if (s == "remember") c.enable_remember = true;
    else if (s == "contrast") c.enable_contrast = true;
    else throw ConfigError("unknown stage '" + std::string(s) + "'");
  }
}

// ---------------------------------------------------------------------------
// Output files of `run`.
//
//   report.txt       key = value summary (no timings)
//   predictions.csv  index,gold,hint,misleading,predicted,correct
//   config.txt       the effective configuration
//   trace_<i>_layers.csv / trace_<i>_steps.csv for the first instances

inline constexpr const char* kPredictionCsvHeader = "index,gold,hint,misleading,predicted,correct";

struct PredictionRow {
  int index = 0, gold = 0, hint = 0;
  bool misleading = false;
  int predicted = -1;
  bool correct = false;
  friend bool operator==(const PredictionRow&, const PredictionRow&) = default;
};

inline std::vector<PredictionRow> prediction_rows(const SyntheticTask& task, const EvalReport& r) {
  std::vector<PredictionRow> rows;
  for (std::size_t i = 0; i < task.instances.size(); ++i) {
    const auto& inst = task.instances[i];
    rows.push_back({static_cast<int>(i), inst.gold_label, inst.hint_label, inst.misleading, r.predictions[i],
                    r.predictions[i] == inst.gold_label});
  }
  return rows;
}

inline void write_prediction_csv(std::ostream& os, const std::vector<PredictionRow>& rows) {
  os << kPredictionCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.index << ',' << r.gold << ',' << r.hint << ',' << int(r.misleading) << ',' << r.predicted << ','
       << int(r.correct) << '\n';
  }
}

inline std::vector<PredictionRow> read_prediction_csv(std::istream& is) {
  std::vector<PredictionRow> out;
  auto i = [](const std::string& s) { return static_cast<int>(text::parse_int(s)); };
  for (const auto& c : lorec::detail::read_csv(is, kPredictionCsvHeader, 6)) {
    out.push_back({i(c[0]), i(c[1]), i(c[2]), lorec::detail::parse_flag(c[3]), i(c[4]),
                   lorec::detail::parse_flag(c[5])});
  }
  return out;
}

inline std::string report_text(const EvalReport& r) {
  std::ostringstream os;
  os << "instances = " << r.instances << "\ncorrect = " << r.correct
     << "\naccuracy = " << text::format_double(r.accuracy) << "\nmacro_f1 = " << text::format_double(r.macro_f1)
     << "\nconfig_fingerprint = " << r.config_fingerprint << '\n';
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& k = r.per_class[c];
    os << "class." << c << " = support " << k.support << " tp " << k.true_positive << " fp " << k.false_positive
       << " fn " << k.false_negative << '\n';
  }
  return os.str();
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << body;
}

}  // namespace detail

/// Generates the task, evaluates it and writes every output file.
inline EvalReport run_and_write(const HarnessConfig& h, const std::filesystem::path& out_dir) {
  h.validate();
  const ModelParams params = build_model(h);
  const SyntheticTask task = generate_task(h.task);
  const EvalReport report = evaluate(task, params, h.decode, static_cast<unsigned>(h.threads));

  std::filesystem::create_directories(out_dir);
  detail::write_file(out_dir / "config.txt", to_text(h));
  detail::write_file(out_dir / "report.txt", report_text(report));
  std::ostringstream preds;
  write_prediction_csv(preds, prediction_rows(task, report));
  detail::write_file(out_dir / "predictions.csv", preds.str());

  const auto traced = std::min<std::size_t>(static_cast<std::size_t>(h.trace_instances), task.instances.size());
  for (std::size_t i = 0; i < traced; ++i) {
    const InstanceRun run = run_instance(task.instances[i], i, params, h.decode, h.task.classes);
    std::ostringstream layers, steps;
    write_layer_csv(layers, layer_rows(run.generation.trace, h.decode.gamma));
    write_step_csv(steps, step_rows(run.generation.trace));
    detail::write_file(out_dir / ("trace_" + std::to_string(i) + "_layers.csv"), layers.str());
    detail::write_file(out_dir / ("trace_" + std::to_string(i) + "_steps.csv"), steps.str());
  }
  return report;
}

}  // namespace lorec::harness

#pragma once

// Attention-mass and feature-scaling probes, written as plot-ready CSV.
//
//   attention_mass.csv   mode,step,layer,cells,graph_mass,text_mass,generated_mass
//   feature_scaling.csv  graph_scale,text_scale,accuracy,macro_f1,graph_mass,text_mass
//
// Masses are head-averaged attention of the last position, averaged over
// every instance that reached the step. `mode` is vanilla or lorec.

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lorec/engine.hpp"
#include "lorec/harness/evaluate.hpp"
#include "lorec/harness/session.hpp"

namespace lorec::harness {

inline constexpr const char* kMassCsvHeader = "mode,step,layer,cells,graph_mass,text_mass,generated_mass";
inline constexpr const char* kScalingCsvHeader = "graph_scale,text_scale,accuracy,macro_f1,graph_mass,text_mass";

struct MassRow {
  std::string mode;
  int step = 0, layer = 0, cells = 0;
  double graph_mass = 0.0, text_mass = 0.0, generated_mass = 0.0;
  friend bool operator==(const MassRow&, const MassRow&) = default;
};

struct ScalingRow {
  double graph_scale = 1.0, text_scale = 1.0;
  double accuracy = 0.0, macro_f1 = 0.0;
  double graph_mass = 0.0, text_mass = 0.0;  // over every (step, layer) cell
  friend bool operator==(const ScalingRow&, const ScalingRow&) = default;
};

inline LorecConfig vanilla(LorecConfig c) {
  c.enable_look = c.enable_remember = c.enable_contrast = false;
  return c;
}

/// Mean attention mass per (step, layer) over the first `instances` tasks.
inline std::vector<MassRow> attention_mass_rows(const SyntheticTask& task, const ModelParams& params,
                                                const LorecConfig& config, const std::string& mode, int instances) {
  std::map<std::pair<int, int>, MassRow> acc;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(instances), task.instances.size());
  for (std::size_t i = 0; i < n; ++i) {
    const InstanceRun run = run_instance(task.instances[i], i, params, config, task.params.classes);
    for (const auto& cell : attention_mass_report(run.generation.trace)) {
      MassRow& r = acc[{cell.step, cell.layer}];
      r.step = cell.step;
      r.layer = cell.layer;
      ++r.cells;
      r.graph_mass += cell.graph;
      r.text_mass += cell.text;
      r.generated_mass += cell.generated;
    }
  }
  std::vector<MassRow> rows;
  for (auto& [key, r] : acc) {
    r.mode = mode;
    r.graph_mass /= r.cells;
    r.text_mass /= r.cells;
    r.generated_mass /= r.cells;
    rows.push_back(r);
  }
  return rows;
}

/// Vanilla decoding with graph and text embeddings multiplied by each pair.
inline std::vector<ScalingRow> feature_scaling_rows(const SyntheticTask& task, const ModelParams& params,
                                                    const LorecConfig& config, const std::vector<ScalePair>& scales,
                                                    int instances) {
  SyntheticTask sub = task;
  sub.instances.resize(std::min<std::size_t>(static_cast<std::size_t>(instances), task.instances.size()));
  std::vector<ScalingRow> rows;
  for (const auto& s : scales) {
    LorecConfig c = vanilla(config);
    c.graph_scale = s.graph;
    c.text_scale = s.text;
    const EvalReport r = evaluate(sub, params, c);
    ScalingRow row{s.graph, s.text, r.accuracy, r.macro_f1};
    long cells = 0;
    for (std::size_t i = 0; i < sub.instances.size(); ++i) {
      const InstanceRun run = run_instance(sub.instances[i], i, params, c, sub.params.classes);
      for (const auto& cell : attention_mass_report(run.generation.trace)) {
        row.graph_mass += cell.graph;
        row.text_mass += cell.text;
        ++cells;
      }
    }
    row.graph_mass /= static_cast<double>(cells);
    row.text_mass /= static_cast<double>(cells);
    rows.push_back(row);
  }
  return rows;
}

inline void write_mass_csv(std::ostream& os, const std::vector<MassRow>& rows) {
  os << kMassCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.mode << ',' << r.step << ',' << r.layer << ',' << r.cells << ',' << text::format_double(r.graph_mass)
       << ',' << text::format_double(r.text_mass) << ',' << text::format_double(r.generated_mass) << '\n';
  }
}

inline std::vector<MassRow> read_mass_csv(std::istream& is) {
  std::vector<MassRow> out;
  auto i = [](const std::string& s) { return static_cast<int>(text::parse_int(s)); };
  for (const auto& c : lorec::detail::read_csv(is, kMassCsvHeader, 7)) {
    out.push_back({c[0], i(c[1]), i(c[2]), i(c[3]), text::parse_double(c[4]), text::parse_double(c[5]),
                   text::parse_double(c[6])});
  }
  return out;
}

inline void write_scaling_csv(std::ostream& os, const std::vector<ScalingRow>& rows) {
  os << kScalingCsvHeader << '\n';
  for (const auto& r : rows) {
    os << text::format_double(r.graph_scale) << ',' << text::format_double(r.text_scale) << ','
       << text::format_double(r.accuracy) << ',' << text::format_double(r.macro_f1) << ','
       << text::format_double(r.graph_mass) << ',' << text::format_double(r.text_mass) << '\n';
  }
}

inline std::vector<ScalingRow> read_scaling_csv(std::istream& is) {
  std::vector<ScalingRow> out;
  for (const auto& c : lorec::detail::read_csv(is, kScalingCsvHeader, 6)) {
    out.push_back({text::parse_double(c[0]), text::parse_double(c[1]), text::parse_double(c[2]),
                   text::parse_double(c[3]), text::parse_double(c[4]), text::parse_double(c[5])});
  }
  return out;
}

inline void diagnose_and_write(const HarnessConfig& h, const std::filesystem::path& out_dir) {
  h.validate();
  const ModelParams params = build_model(h);
  const SyntheticTask task = generate_task(h.task);
  std::vector<MassRow> mass = attention_mass_rows(task, params, vanilla(h.decode), "vanilla", h.diagnose_instances);
  const auto lorec_rows = attention_mass_rows(task, params, h.decode, "lorec", h.diagnose_instances);
  mass.insert(mass.end(), lorec_rows.begin(), lorec_rows.end());

  std::filesystem::create_directories(out_dir);
  std::ostringstream m, s;
  write_mass_csv(m, mass);
  write_scaling_csv(s, feature_scaling_rows(task, params, h.decode, h.scales, h.diagnose_instances));
  detail::write_file(out_dir / "attention_mass.csv", m.str());
  detail::write_file(out_dir / "feature_scaling.csv", s.str());
  detail::write_file(out_dir / "config.txt", to_text(h));
}

}  // namespace lorec::harness

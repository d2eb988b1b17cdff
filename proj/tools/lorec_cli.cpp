// lorec: command-line harness.
//
//   lorec run            generate the synthetic task, decode and score it
//   lorec diagnose       attention-mass and feature-scaling probes
//   lorec augment-stats  Monte-Carlo check of edge drop probabilities
//   lorec oracle-check   library against the straight-line oracle
//   lorec dump-config    print the effective configuration
//
// Exit codes: 0 success, 1 check failure, 2 configuration error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lorec/harness/augment_stats.hpp"
#include "lorec/harness/diagnostics.hpp"
#include "lorec/harness/fixtures.hpp"
#include "lorec/harness/oracle_check.hpp"
#include "lorec/harness/session.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kConfigError = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> stages;
  std::string out = "out";
};

lorec::harness::HarnessConfig load(const Common& c) {
  using namespace lorec::harness;
  HarnessConfig h = c.config.empty() ? HarnessConfig{} : load_harness_config(c.config);
  if (c.seed) h.set_seed(*c.seed);
  if (c.stages) apply_stages(h.decode, *c.stages);
  h.validate();
  return h;
}

void add_common(CLI::App* sub, Common& c, bool with_out) {
  sub->add_option("--config", c.config, "Config file (key = value)")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "Decoding and task seed");
  sub->add_option("--stages", c.stages, "Comma-separated subset of look,remember,contrast");
  if (with_out) sub->add_option("--out", c.out, "Output directory");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_run(const Common& c) {
  const auto h = load(c);
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = lorec::harness::run_and_write(h, c.out);
  std::cout << "accuracy " << report.accuracy << " macro_f1 " << report.macro_f1 << " instances "
            << report.instances << " (" << seconds_since(t0) << " s) -> " << c.out << "\n";
  return kOk;
}

int cmd_diagnose(const Common& c) {
  const auto h = load(c);
  const auto t0 = std::chrono::steady_clock::now();
  lorec::harness::diagnose_and_write(h, c.out);
  std::cout << "wrote attention_mass.csv and feature_scaling.csv (" << seconds_since(t0) << " s) -> " << c.out
            << "\n";
  return kOk;
}

int cmd_augment_stats(const Common& c, long trials, const std::string& graph_path) {
  const auto h = load(c);
  lorec::Graph g = lorec::harness::path_graph_abcd();
  if (!graph_path.empty()) {
    std::ifstream in(graph_path);
    if (!in) throw lorec::ConfigError("cannot open graph file " + graph_path);
    g = lorec::read_graph(in);
  }
  const auto stats = lorec::harness::augment_stats(g, h.decode, trials, lorec::derive_seed(h.decode.seed, 0));
  std::filesystem::create_directories(c.out);
  std::ofstream out(std::filesystem::path(c.out) / "augment_stats.csv", std::ios::binary);
  lorec::harness::write_augment_csv(out, stats);
  lorec::harness::write_augment_csv(std::cout, stats);
  std::cout << (stats.passed() ? "augment-stats PASS" : "augment-stats FAIL") << "\n";
  return stats.passed() ? kOk : kCheckFailed;
}

int cmd_oracle(lorec::harness::OracleOptions o, const std::optional<std::string>& out_dir) {
  const auto report = lorec::harness::oracle_check(o);
  const std::string body = lorec::harness::to_text(report);
  std::cout << body;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    std::ofstream(std::filesystem::path(*out_dir) / "oracle_check.csv", std::ios::binary) << body;
  }
  return report.passed() ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-conditioned decoding harness"};
  app.require_subcommand(1);

  Common run_opts, diag_opts, aug_opts, dump_opts;
  auto* run = app.add_subcommand("run", "Generate the synthetic task, decode and evaluate");
  add_common(run, run_opts, true);
  auto* diag = app.add_subcommand("diagnose", "Attention-mass and feature-scaling probes");
  add_common(diag, diag_opts, true);

  auto* aug = app.add_subcommand("augment-stats", "Monte-Carlo validation of edge drop probabilities");
  add_common(aug, aug_opts, true);
  long trials = 100000;
  std::string graph_path;
  aug->add_option("--trials", trials, "Monte-Carlo trials")->check(CLI::PositiveNumber);
  aug->add_option("--graph", graph_path, "Graph file (default: the A-B-C-D path)")->check(CLI::ExistingFile);

  auto* oracle = app.add_subcommand("oracle-check", "Compare the library with the straight-line oracle");
  lorec::harness::OracleOptions oracle_opts;
  std::vector<std::string> suites;
  std::optional<std::string> oracle_out;
  bool no_suites = false;
  oracle->add_option("--seed", oracle_opts.seed, "Scenario seed");
  oracle->add_option("--scenarios", oracle_opts.scenarios, "Engine scenarios");
  oracle->add_option("--suite", suites, "Suites to run (repeatable; default all)");
  oracle->add_flag("--no-suites", no_suites, "Select no suites (reported as a failure)");
  oracle->add_option("--mutate-eta", oracle_opts.eta_mutation, "Shift the library's eta (self-test)");
  oracle->add_option("--out", oracle_out, "Also write oracle_check.csv here");

  auto* dump = app.add_subcommand("dump-config", "Print the effective configuration");
  add_common(dump, dump_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*diag) return cmd_diagnose(diag_opts);
    if (*aug) return cmd_augment_stats(aug_opts, trials, graph_path);
    if (*oracle) {
      if (no_suites) oracle_opts.suites.clear();
      else if (!suites.empty()) oracle_opts.suites = suites;
      return cmd_oracle(oracle_opts, oracle_out);
    }
    if (*dump) {
      std::cout << lorec::harness::to_text(load(dump_opts));
      return kOk;
    }
  } catch (const lorec::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
  return kOk;
}

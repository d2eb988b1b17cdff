#pragma once

// Compares the library against the straight-line oracle, equation by
// equation and end to end, and reports the largest deviation of each.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lorec/contrast.hpp"
#include "lorec/engine.hpp"
#include "lorec/graph.hpp"
#include "lorec/harness/fixtures.hpp"
#include "lorec/harness/reference_oracle.hpp"
#include "lorec/interventions.hpp"
#include "lorec/numerics.hpp"

namespace lorec::harness {

inline constexpr double kOracleTolerance = 1e-6;

struct CheckRow {
  std::string name;
  double max_deviation = 0.0;
  double tolerance = kOracleTolerance;
  long checks = 0;
  bool passed() const { return checks > 0 && max_deviation <= tolerance; }
};

struct OracleReport {
  std::vector<CheckRow> rows;
  int scenarios = 0;
  int steps = 0;
  int armed_steps = 0;
  int unarmed_steps = 0;
  int gate_open = 0;
  int gate_closed = 0;
  std::string failure;  // set when nothing could be checked

  bool passed() const {
    if (rows.empty() || !failure.empty()) return false;
    return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.passed(); });
  }
};

inline const std::vector<std::string>& oracle_suites() {
  static const std::vector<std::string> names = {"entropy", "rectify", "memory", "augment",
                                                 "contrast", "plausibility", "engine"};
  return names;
}

struct OracleOptions {
  std::uint64_t seed = 20240601;
  int scenarios = 24;
  std::vector<std::string> suites = oracle_suites();
  // Mutation self-test: the library side runs with eta shifted by this much.
  double eta_mutation = 0.0;
};

namespace detail {

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (!(d <= m)) m = d;  // NaN propagates as a failure
  }
  return m;
}

inline void note(CheckRow& row, double deviation) {
  ++row.checks;
  if (!(deviation <= row.max_deviation)) row.max_deviation = deviation;
}

inline Vector random_distribution(Rng& rng, std::size_t n) {
  Vector logits(n);
  const double spread = 0.1 + 6.0 * rng.uniform();
  for (double& v : logits) v = spread * rng.normal();
  return softmax(logits);
}

inline void check_entropy(const OracleOptions& o, CheckRow& row) {
  Rng rng(derive_seed(o.seed, 11));
  for (int i = 0; i < 400; ++i) {
    const std::size_t n = static_cast<std::size_t>(rng.integer(2, 40));
    const Vector p = random_distribution(rng, n);
    const std::size_t top = (i % 3 == 0) ? n : static_cast<std::size_t>(rng.integer(2, static_cast<std::int64_t>(n)));
    const bool renorm = i % 5 != 4;
    note(row, std::abs(normalized_entropy(p, top, renorm) - oracle::entropy(p, top, renorm)));
  }
}

inline void check_rectify(const OracleOptions& o, CheckRow& row) {
  Rng rng(derive_seed(o.seed, 12));
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = static_cast<std::size_t>(rng.integer(1, 20));
    Vector e(n);
    for (double& v : e) v = 3.0 * rng.normal();
    std::vector<std::size_t> graph;
    for (std::size_t j = 0; j < n; ++j) {
      if (rng.uniform() < 0.5) graph.push_back(j);
    }
    const double eta = rng.uniform();
    const bool armed = i % 4 != 0;
    const Vector got = rectify_attention_row(e, graph, eta + o.eta_mutation, armed);
    Vector want = e;
    if (armed) {
      for (std::size_t j : graph) want[j] = e[j] + eta * std::fabs(e[j]);
    }
    note(row, max_abs_diff(got, want));
    note(row, max_abs_diff(softmax(got), oracle::probabilities(want)));
  }
}

inline void check_memory(const OracleOptions& o, CheckRow& row) {
  Rng rng(derive_seed(o.seed, 13));
  for (int i = 0; i < 300; ++i) {
    const std::size_t d = static_cast<std::size_t>(rng.integer(1, 12));
    const std::size_t j = static_cast<std::size_t>(rng.integer(0, 6));
    const Activation act = i % 2 ? Activation::silu : Activation::relu;
    Matrix g(j, d);
    for (double& v : g.data()) v = rng.normal();
    Vector x(d), ffn(d);
    for (double& v : x) v = rng.normal();
    for (double& v : ffn) v = rng.normal();
    const double alpha = rng.uniform();
    const bool fire = i % 3 != 0;

    oracle::Row mem(d, 0.0);
    for (std::size_t r = 0; r < j; ++r) {
      double ip = 0.0;
      for (std::size_t c = 0; c < d; ++c) ip += x[c] * g(r, c);
      for (std::size_t c = 0; c < d; ++c) mem[c] += oracle::phi(ip, act) * g(r, c);
    }
    oracle::Row fused = ffn;
    if (fire) {
      for (std::size_t c = 0; c < d; ++c) fused[c] = (1.0 - alpha) * ffn[c] + alpha * mem[c];
    }
    const Vector got_mem = graph_memory(x, g, act);
    note(row, max_abs_diff(got_mem, mem));
    note(row, max_abs_diff(fuse_ffn(ffn, got_mem, alpha, fire), fused));
  }
}

inline void check_augment(const OracleOptions& o, CheckRow& row) {
  Rng rng(derive_seed(o.seed, 14));
  for (int i = 0; i < 200; ++i) {
    const Graph g = random_graph(rng, static_cast<int>(rng.integer(2, 12)), 30, 2);
    if (g.edges().empty()) continue;
    const double mu = rng.uniform();
    const double tau = rng.uniform();
    const double eps = 0.5 + rng.uniform();
    const bool prose = i % 2 == 1;
    const Vector got = edge_drop_probabilities(g, mu, tau, eps,
                                               prose ? AugmentOrientation::prose : AugmentOrientation::as_written);
    note(row, max_abs_diff(got, oracle::drop_probabilities(g, mu, tau, eps, prose)));
  }
}

inline void check_contrast(const OracleOptions& o, CheckRow& row) {
  Rng rng(derive_seed(o.seed, 15));
  for (int i = 0; i < 300; ++i) {
    const std::size_t v = static_cast<std::size_t>(rng.integer(1, 30));
    LogitTriple t;
    t.psi_orig.resize(v);
    t.psi_text.resize(v);
    t.psi_aug.resize(v);
    for (std::size_t k = 0; k < v; ++k) {
      t.psi_orig[k] = 4.0 * rng.normal();
      t.psi_text[k] = 4.0 * rng.normal();
      t.psi_aug[k] = 4.0 * rng.normal();
    }
    t.gate = i % 2 == 0;
    const double omega = 2.0 * rng.uniform();
    const double beta = 2.0 * rng.uniform();
    oracle::Row want(v);
    for (std::size_t k = 0; k < v; ++k) {
      want[k] = t.psi_orig[k] + omega * (t.psi_orig[k] - t.psi_text[k]) +
                (t.gate ? beta * (t.psi_orig[k] - t.psi_aug[k]) : 0.0);
    }
    note(row, max_abs_diff(combine_logits(t, omega, beta), want));
  }
}

inline void check_plausibility(const OracleOptions& o, CheckRow& row) {
  Rng rng(derive_seed(o.seed, 16));
  for (int i = 0; i < 400; ++i) {
    const std::size_t v = static_cast<std::size_t>(rng.integer(1, 30));
    oracle::Row logits(v);
    for (double& x : logits) x = (i % 7 == 0) ? static_cast<double>(rng.integer(0, 2)) : 3.0 * rng.normal();
    const double kappa = (i % 4 == 0) ? 1.0 : 0.01 + 0.99 * rng.uniform();
    const oracle::Row p = oracle::probabilities(logits);
    double pmax = 0.0;
    for (double x : p) pmax = std::max(pmax, x);
    std::vector<std::size_t> want;
    for (std::size_t k = 0; k < v; ++k) {
      if (p[k] >= kappa * pmax) want.push_back(k);
    }
    note(row, plausibility_set(logits, kappa) == want ? 0.0 : 1.0);
  }
}

inline void check_engine(const OracleOptions& o, OracleReport& report, CheckRow& enc, CheckRow& ent,
                         CheckRow& logits, CheckRow& discrete) {
  for (int s = 0; s < o.scenarios; ++s) {
    Scenario sc = handset_scenario(o.seed, s);
    if (s % 8 == 7) sc.config.decode_mode = DecodeMode::sample;
    LorecConfig lib = sc.config;
    lib.eta += o.eta_mutation;
    ++report.scenarios;

    const Matrix tokens = encode_graph(sc.graph, sc.params);
    const oracle::Rows want_tokens = oracle::encode(sc.graph, sc.params);
    for (std::size_t r = 0; r < tokens.rows(); ++r) note(enc, max_abs_diff(tokens.row(r), want_tokens[r]));

    const GenerationResult got = generate(sc.graph, sc.prompt, sc.params, lib);
    const oracle::RunResult want = oracle::run(sc.graph, sc.prompt, sc.params, sc.config);

    note(discrete, got.tokens == want.tokens ? 0.0 : 1.0);
    note(discrete, got.trace.gate == want.gate && got.trace.dropped_edge_count == want.dropped ? 0.0 : 1.0);
    if (!want.drop_probs.empty()) note(logits, max_abs_diff(got.trace.edge_drop_probs, want.drop_probs));
    (want.gate ? report.gate_open : report.gate_closed) += 1;

    const std::size_t steps = std::min(got.trace.steps.size(), want.steps.size());
    if (got.trace.steps.size() != want.steps.size()) note(discrete, 1.0);
    for (std::size_t t = 0; t < steps; ++t) {
      const StepTrace& a = got.trace.steps[t];
      const oracle::StepResult& b = want.steps[t];
      ++report.steps;
      (b.trigger_layer >= 0 ? report.armed_steps : report.unarmed_steps) += 1;
      note(logits, max_abs_diff(a.psi_orig, b.orig));
      note(logits, max_abs_diff(a.psi_final, b.final_logits));
      if (sc.config.enable_contrast) note(logits, max_abs_diff(a.psi_text, b.text));
      if (want.gate) note(logits, max_abs_diff(a.psi_aug, b.aug));
      for (std::size_t l = 0; l < a.layers.size() && l < b.entropies.size(); ++l) {
        note(ent, std::abs(a.layers[l].entropy - b.entropies[l]));
      }
      const bool same = a.trigger_layer.value_or(-1) == b.trigger_layer &&
                        a.remember_layer.value_or(-1) == b.remember_layer && a.candidates == b.candidates &&
                        a.token == b.token;
      note(discrete, same ? 0.0 : 1.0);
    }
  }
}

}  // namespace detail

/// Runs the selected suites. An empty or unknown selection is a failure.
inline OracleReport oracle_check(const OracleOptions& o) {
  OracleReport report;
  std::set<std::string> picked;
  for (const auto& s : o.suites) {
    if (s == "all") {
      picked.insert(oracle_suites().begin(), oracle_suites().end());
    } else if (std::find(oracle_suites().begin(), oracle_suites().end(), s) != oracle_suites().end()) {
      picked.insert(s);
    } else {
      report.failure = "unknown suite '" + s + "'";
      return report;
    }
  }
  if (picked.empty()) {
    report.failure = "no checks run";
    return report;
  }
  auto row = [&](const char* name) -> CheckRow& { return report.rows.emplace_back(CheckRow{name}); };
  // Rows are appended in suite order and never referenced after a later push.
  if (picked.count("entropy")) detail::check_entropy(o, row("entropy"));
  if (picked.count("rectify")) detail::check_rectify(o, row("rectify"));
  if (picked.count("memory")) detail::check_memory(o, row("graph_memory"));
  if (picked.count("augment")) detail::check_augment(o, row("drop_prob"));
  if (picked.count("contrast")) detail::check_contrast(o, row("combine"));
  if (picked.count("plausibility")) detail::check_plausibility(o, row("plausibility"));
  if (picked.count("engine")) {
    if (o.scenarios < 1) {
      report.failure = "no checks run";
      return report;
    }
    CheckRow enc{"engine_encoder"}, ent{"engine_entropy"}, logits{"engine_logits"}, discrete{"engine_discrete", 0.0, 0.0};
    detail::check_engine(o, report, enc, ent, logits, discrete);
    for (auto* r : {&enc, &ent, &logits, &discrete}) report.rows.push_back(*r);
  }
  return report;
}

inline std::string to_text(const OracleReport& r) {
  std::ostringstream os;
  os << "check,max_deviation,tolerance,checks,result\n";
  for (const auto& row : r.rows) {
    os << row.name << ',' << text::format_double(row.max_deviation) << ',' << text::format_double(row.tolerance)
       << ',' << row.checks << ',' << (row.passed() ? "PASS" : "FAIL") << '\n';
  }
  if (r.scenarios > 0) {
    os << "# scenarios " << r.scenarios << " steps " << r.steps << " armed " << r.armed_steps << " unarmed "
       << r.unarmed_steps << " gate_open " << r.gate_open << " gate_closed " << r.gate_closed << '\n';
  }
  if (!r.failure.empty()) os << "# failure: " << r.failure << '\n';
  os << (r.passed() ? "oracle-check PASS" : "oracle-check FAIL") << '\n';
  return os.str();
}

}  // namespace lorec::harness

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "lorec/engine.hpp"
#include "lorec/harness/fixtures.hpp"
#include "lorec/harness/reference_oracle.hpp"

using namespace lorec;
using harness::handset_scenario;

namespace {

// Plain greedy decoding with no interventions at all.
std::vector<int> vanilla_greedy(const Graph& g, TokenSequence seq, const ModelParams& p, int max_new, int end) {
  const Matrix tokens = encode_graph(g, p);
  std::vector<int> out;
  for (int s = 0; s < max_new; ++s) {
    const int t = static_cast<int>(argmax(forward_step(seq, tokens, p, nullptr).final_logits));
    out.push_back(t);
    if (t == end) break;
    seq.append_generated(t);
  }
  return out;
}

}  // namespace

TEST(Generate, DisabledStagesEqualVanillaGreedy) {
  for (int s = 0; s < 40; ++s) {
    auto sc = handset_scenario(21, s);
    sc.config.enable_look = sc.config.enable_remember = sc.config.enable_contrast = false;
    sc.config.decode_mode = DecodeMode::greedy;
    sc.config.kappa = 1.0;
    sc.config.end_token = s % 2 ? 4 : -1;
    const auto r = generate(sc.graph, sc.prompt, sc.params, sc.config);
    EXPECT_EQ(r.tokens, vanilla_greedy(sc.graph, sc.prompt, sc.params, sc.config.max_new_tokens, sc.config.end_token));
  }
}

TEST(Generate, ZeroStrengthEqualsVanillaGreedy) {
  for (int s = 0; s < 40; ++s) {
    auto sc = handset_scenario(22, s);
    sc.config.eta = sc.config.alpha = sc.config.omega = sc.config.beta = 0.0;
    sc.config.decode_mode = DecodeMode::greedy;
    sc.config.kappa = 1.0;
    const auto r = generate(sc.graph, sc.prompt, sc.params, sc.config);
    EXPECT_EQ(r.tokens, vanilla_greedy(sc.graph, sc.prompt, sc.params, sc.config.max_new_tokens, -1));
  }
}

TEST(Generate, DeterministicUnderSeed) {
  for (int s = 0; s < 16; ++s) {
    auto sc = handset_scenario(23, s);
    sc.config.decode_mode = s % 2 ? DecodeMode::sample : DecodeMode::greedy;
    sc.config.kappa = 0.2;
    const auto a = generate(sc.graph, sc.prompt, sc.params, sc.config);
    const auto b = generate(sc.graph, sc.prompt, sc.params, sc.config);
    EXPECT_EQ(a.tokens, b.tokens);
    EXPECT_EQ(a.trace, b.trace);
  }
}

TEST(Generate, MatchesStraightLineOracle) {
  for (int s = 0; s < 30; ++s) {
    auto sc = handset_scenario(24, s);
    if (s % 5 == 1) sc.config.decode_mode = DecodeMode::sample;
    if (s % 6 == 2) sc.config.interventions_on_all_passes = true;
    const auto got = generate(sc.graph, sc.prompt, sc.params, sc.config);
    const auto want = oracle::run(sc.graph, sc.prompt, sc.params, sc.config);
    ASSERT_EQ(got.tokens, want.tokens) << sc.name;
    ASSERT_EQ(got.trace.gate, want.gate);
    for (std::size_t t = 0; t < want.steps.size(); ++t) {
      const auto& a = got.trace.steps[t];
      const auto& b = want.steps[t];
      for (std::size_t k = 0; k < b.orig.size(); ++k) {
        EXPECT_NEAR(a.psi_orig[k], b.orig[k], 1e-6);
        EXPECT_NEAR(a.psi_final[k], b.final_logits[k], 1e-6);
      }
      EXPECT_EQ(a.trigger_layer.value_or(-1), b.trigger_layer);
      EXPECT_EQ(a.remember_layer.value_or(-1), b.remember_layer);
      EXPECT_EQ(a.candidates, b.candidates);
    }
  }
}

TEST(Generate, TraceInvariants) {
  for (int s = 0; s < 40; ++s) {
    auto sc = handset_scenario(25, s);
    sc.config.end_token = 3;
    const auto r = generate(sc.graph, sc.prompt, sc.params, sc.config);
    ASSERT_LE(r.tokens.size(), static_cast<std::size_t>(sc.config.max_new_tokens));
    for (std::size_t i = 0; i + 1 < r.tokens.size(); ++i) EXPECT_NE(r.tokens[i], 3);
    for (const auto& st : r.trace.steps) {
      EXPECT_EQ(st.forward_passes, 2 + int(st.gate));
      std::optional<int> first;
      int remembered = 0;
      for (const auto& lt : st.layers) {
        if (!first && lt.entropy > sc.config.gamma) first = lt.layer;
        remembered += lt.remember_fired;
        EXPECT_NEAR(lt.graph_mass + lt.text_mass + lt.generated_mass, 1.0, 1e-9);
        EXPECT_LE(lt.row_sum_error, 1e-9);
      }
      EXPECT_EQ(st.trigger_layer, first);
      EXPECT_LE(remembered, 1);
      EXPECT_EQ(st.remember_layer.has_value(), remembered == 1);
    }
  }
}

TEST(Generate, SinglePassWithoutContrast) {
  auto sc = handset_scenario(26, 0);
  sc.config.enable_contrast = false;
  for (const auto& st : generate(sc.graph, sc.prompt, sc.params, sc.config).trace.steps) EXPECT_EQ(st.forward_passes, 1);
}

TEST(Generate, ValidatesBeforeCompute) {
  auto sc = handset_scenario(27, 0);
  sc.config.gamma = 2.0;
  EXPECT_THROW(generate(sc.graph, sc.prompt, sc.params, sc.config), ConfigError);
  sc.config.gamma = 0.5;
  sc.config.look_layers = LayerRange::absolute(0, 5);
  EXPECT_THROW(generate(sc.graph, sc.prompt, sc.params, sc.config), ConfigError);
  sc.config.look_layers = LayerRange::absolute(1, 1);
  EXPECT_THROW(generate(sc.graph, TokenSequence::with_graph_prefix(1, 0, {1}), sc.params, sc.config), ShapeError);
}

TEST(AttentionMass, AllTextIsTextEverywhere) {
  const ModelParams p = harness::handset_model();
  const Graph g(0, {}, Matrix(0, 3));
  LorecConfig c;
  c.look_layers = c.remember_layers = LayerRange::absolute(0, 1);
  c.max_new_tokens = 1;
  c.end_token = -1;
  const auto r = generate(g, TokenSequence::with_graph_prefix(0, 0, {1, 2, 3}), p, c);
  for (const auto& cell : attention_mass_report(r.trace)) {
    EXPECT_EQ(cell.text, 1.0);
    EXPECT_EQ(cell.graph, 0.0);
  }
  EXPECT_THROW(attention_mass_report(DecodeTrace{}), DomainError);
}

TEST(AttentionMass, LargeEtaRaisesGraphMassAtLookLayers) {
  int compared = 0;
  for (int s = 0; s < 60; ++s) {
    auto sc = handset_scenario(28, s);
    sc.config.gamma = 0.0;
    sc.config.look_gating = LookGating::sticky;
    sc.config.enable_remember = false;
    sc.config.enable_contrast = false;
    sc.config.max_new_tokens = 1;
    sc.config.eta = 2.0;
    const auto on = generate(sc.graph, sc.prompt, sc.params, sc.config);
    sc.config.eta = 0.0;
    const auto off = generate(sc.graph, sc.prompt, sc.params, sc.config);
    const auto& a = on.trace.steps[0];
    const auto& b = off.trace.steps[0];
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      if (!a.layers[l].look_applied) continue;
      // e + eta|e| lifts every graph logit. Look covers layer 1 only, so both runs feed it the same input.
      EXPECT_GT(a.layers[l].graph_mass, b.layers[l].graph_mass);
      EXPECT_GT(a.layers[l].graph_mass, a.layers[l].raw_graph_mass);
      ++compared;
    }
  }
  EXPECT_GT(compared, 0);
}

TEST(TraceCsv, RoundTrips) {
  auto sc = handset_scenario(29, 2);
  const auto r = generate(sc.graph, sc.prompt, sc.params, sc.config);
  std::stringstream layers, steps;
  const auto lr = layer_rows(r.trace, sc.config.gamma);
  const auto sr = step_rows(r.trace);
  write_layer_csv(layers, lr);
  write_step_csv(steps, sr);
  EXPECT_EQ(read_layer_csv(layers), lr);
  EXPECT_EQ(read_step_csv(steps), sr);
  std::istringstream bad("step,layer\n1,2\n");
  EXPECT_THROW(read_layer_csv(bad), FormatError);
}

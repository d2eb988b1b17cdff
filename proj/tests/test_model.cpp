#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "lorec/contrast.hpp"
#include "lorec/harness/fixtures.hpp"
#include "lorec/harness/reference_oracle.hpp"
#include "lorec/model.hpp"

using namespace lorec;
using harness::handset_model;

namespace {

double max_diff(std::span<const double> a, std::span<const double> b) {
  EXPECT_EQ(a.size(), b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

ModelParams identity_encoder_model() {
  ModelDims d;
  d.vocab_size = 4;
  d.model_dim = 2;
  d.ffn_dim = 2;
  d.head_count = 1;
  d.layer_count = 2;
  d.max_positions = 8;
  d.feature_dim = 2;
  d.graph_dim = 2;
  d.max_graph_tokens = 4;
  ModelParams p = ModelParams::zeros(d);
  for (std::size_t i = 0; i < 2; ++i) {
    p.encoder[0].self_weight(i, i) = 1.0;
    p.encoder[0].neighbor_weight(i, i) = 1.0;
    p.projector(i, i) = 1.0;
  }
  return p;
}

}  // namespace

TEST(Encoder, ThreeNodePathByHand) {
  const ModelParams p = identity_encoder_model();
  Matrix x(3, 2);
  x(0, 0) = 1; x(0, 1) = 2;
  x(1, 0) = 3; x(1, 1) = 4;
  x(2, 0) = 5; x(2, 1) = 6;
  const Graph g(3, {{0, 1}, {1, 2}}, x);
  const Matrix t = encode_graph(g, p);
  // node 0: x0 + x1; node 1: x1 + (x0 + x2)/2; node 2: x2 + x1
  EXPECT_EQ(t(0, 0), 4.0);
  EXPECT_EQ(t(0, 1), 6.0);
  EXPECT_EQ(t(1, 0), 6.0);
  EXPECT_EQ(t(1, 1), 8.0);
  EXPECT_EQ(t(2, 0), 8.0);
  EXPECT_EQ(t(2, 1), 10.0);
}

TEST(Encoder, IsolatedNodeUsesZeroAggregate) {
  ModelParams p = identity_encoder_model();
  p.encoder[0].bias = {0.5, -10.0};
  p.projector_bias = {1.0, 1.0};
  Matrix x(1, 2);
  x(0, 0) = 2.0;
  x(0, 1) = 3.0;
  const Matrix t = encode_graph(Graph(1, {}, x), p);
  EXPECT_EQ(t(0, 0), 3.5);  // relu(2 + 0.5) + 1
  EXPECT_EQ(t(0, 1), 1.0);  // relu(3 - 10) + 1
}

TEST(Encoder, RegularGraphWithEqualFeaturesIsSymmetric) {
  const ModelParams p = handset_model(2);
  const Graph cycle(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}}, Matrix(5, 3, 0.7));
  const Matrix t = encode_graph(cycle, p);
  ASSERT_EQ(t.rows(), 4u);  // max_graph_tokens
  for (std::size_t j = 1; j < t.rows(); ++j) {
    for (std::size_t c = 0; c < t.cols(); ++c) EXPECT_EQ(t(j, c), t(0, c));
  }
}

TEST(Encoder, MatchesOracleAndRejectsFeatureMismatch) {
  Rng rng(3);
  for (int variant = 0; variant < 4; ++variant) {
    const ModelParams p = handset_model(variant);
    const Graph g = harness::random_graph(rng, 6, 12, 3);
    const Matrix t = encode_graph(g, p);
    const auto want = oracle::encode(g, p);
    for (std::size_t j = 0; j < t.rows(); ++j) EXPECT_LT(max_diff(t.row(j), want[j]), 1e-12);
  }
  EXPECT_THROW(encode_graph(harness::path_graph_abcd(2), handset_model()), ShapeError);
}

TEST(TokenSequence, GraphSlotsFormAPrefix) {
  EXPECT_THROW(TokenSequence({1, 0}, {Segment::text, Segment::graph}), DomainError);
  EXPECT_THROW(TokenSequence({1}, {}), ShapeError);
  auto s = TokenSequence::with_graph_prefix(2, 0, {3, 4});
  EXPECT_EQ(s.graph_count(), 2u);
  s.append_generated(1);
  EXPECT_EQ(s.segments().back(), Segment::generated);
}

TEST(Forward, MatchesStraightLineOracle) {
  Rng rng(11);
  for (int variant = 0; variant < 4; ++variant) {
    const ModelParams p = handset_model(variant);
    const Graph g = harness::random_graph(rng, 3, 4, 3);
    const Matrix tokens = encode_graph(g, p);
    const auto seq = TokenSequence::with_graph_prefix(tokens.rows(), 0, {1, 2, 3});
    const auto act = forward_step(seq, tokens, p, nullptr);
    const auto want = oracle::pass(seq.token_ids(), seq.segments(), oracle::encode(g, p), p, LorecConfig{}, false, false);
    EXPECT_LT(max_diff(act.final_logits, want.logits), 1e-6);
    for (std::size_t l = 0; l < act.layers.size(); ++l) EXPECT_LT(std::abs(act.layers[l].entropy - want.entropies[l]), 1e-9);
  }
}

TEST(Forward, DeterministicAndEarlyExitConsistent) {
  const ModelParams p = random_params(ModelDims{}, 5);
  Matrix tokens(3, 64);
  for (double& v : tokens.data()) v = 0.1;
  const auto seq = TokenSequence::with_graph_prefix(3, 0, {1, 5, 9, 3});
  const auto a = forward_step(seq, tokens, p, nullptr);
  const auto b = forward_step(seq, tokens, p, nullptr);
  EXPECT_EQ(a.final_logits, b.final_logits);
  EXPECT_EQ(a.final_logits, a.layers.back().logits);
  for (const auto& rec : a.layers) {
    EXPECT_GE(rec.entropy, 0.0);
    EXPECT_LE(rec.entropy, 1.0);
    for (const auto& w : rec.attention_weights) EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(Forward, CausalMask) {
  const ModelParams p = random_params(ModelDims{}, 6, 0.3);
  const Matrix none(0, 64);
  ForwardOptions o;
  o.keep_hidden = true;
  const auto a = forward_step(TokenSequence::with_graph_prefix(0, 0, {1, 2, 3, 4}), none, p, nullptr, o);
  const auto b = forward_step(TokenSequence::with_graph_prefix(0, 0, {1, 2, 3, 40}), none, p, nullptr, o);
  for (std::size_t l = 0; l < a.hidden.size(); ++l) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t c = 0; c < 64; ++c) ASSERT_EQ(a.hidden[l](i, c), b.hidden[l](i, c));
    }
  }
  EXPECT_NE(a.final_logits, b.final_logits);
}

TEST(Forward, Errors) {
  const ModelParams p = handset_model();
  const Matrix none(0, 4);
  EXPECT_THROW(forward_step(TokenSequence::with_graph_prefix(0, 0, {5}), none, p, nullptr), IndexError);
  EXPECT_THROW(forward_step(TokenSequence::with_graph_prefix(0, 0, std::vector<int>(25, 1)), none, p, nullptr),
               IndexError);
  EXPECT_THROW(forward_step(TokenSequence::with_graph_prefix(2, 0, {1}), none, p, nullptr), ShapeError);
}

TEST(TextOnly, EqualsTextSubsequenceWithPreservedPositions) {
  Rng rng(12);
  for (int variant = 0; variant < 4; ++variant) {
    const ModelParams p = handset_model(variant);
    const Graph g = harness::random_graph(rng, 4, 6, 3);
    const Matrix tokens = encode_graph(g, p);
    const std::vector<int> text = {1, 3, 2};
    const auto seq = TokenSequence::with_graph_prefix(tokens.rows(), 0, text);
    const Vector masked = text_only_logits(seq, p);

    // Same weights with positions shifted past the graph slots.
    ModelParams shifted = p;
    for (std::size_t i = 0; i + tokens.rows() < shifted.position_embedding.rows(); ++i) {
      for (std::size_t c = 0; c < 4; ++c) shifted.position_embedding(i, c) = p.position_embedding(i + tokens.rows(), c);
    }
    const auto sub = TokenSequence::with_graph_prefix(0, 0, text);
    const auto want = oracle::pass(sub.token_ids(), sub.segments(), {}, shifted, LorecConfig{}, false, false);
    EXPECT_LT(max_diff(masked, want.logits), 1e-6);

    // Independent of the graph token values and idempotent.
    ForwardOptions o;
    o.mask_graph = true;
    EXPECT_EQ(forward_step(seq, tokens, p, nullptr, o).final_logits, masked);
    EXPECT_EQ(text_only_logits(seq, p), masked);
  }
}

TEST(TextOnly, NoGraphSlotsMatchesVanilla) {
  const ModelParams p = handset_model(1);
  const auto seq = TokenSequence::with_graph_prefix(0, 0, {1, 2, 4, 3});
  EXPECT_EQ(text_only_logits(seq, p), forward_step(seq, Matrix(0, 4), p, nullptr).final_logits);
}

TEST(Checkpoint, RoundTripIsExact) {
  for (const ModelParams& p : {handset_model(3), random_params(ModelDims{}, 9)}) {
    std::stringstream ss;
    write_checkpoint(ss, p);
    EXPECT_EQ(read_checkpoint(ss), p);
  }
}

TEST(Checkpoint, RejectsCorruption) {
  std::stringstream ss;
  write_checkpoint(ss, handset_model());
  const std::string good = ss.str();
  std::istringstream bad_magic("not-a-checkpoint\n");
  EXPECT_THROW(read_checkpoint(bad_magic), FormatError);
  std::istringstream truncated(good.substr(0, good.size() / 2));
  EXPECT_THROW(read_checkpoint(truncated), FormatError);
  std::string renamed = good;
  renamed.replace(renamed.find("token_embedding"), 15, "token_embeddinX");
  std::istringstream mismatched(renamed);
  EXPECT_THROW(read_checkpoint(mismatched), FormatError);
}

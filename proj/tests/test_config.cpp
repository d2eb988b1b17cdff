#include <gtest/gtest.h>

#include "lorec/config.hpp"

using namespace lorec;

TEST(Config, DefaultsMatchTheParameterTable) {
  const LorecConfig c;
  EXPECT_EQ(c.mu, 0.2);
  EXPECT_EQ(c.tau, 0.7);
  EXPECT_EQ(c.omega, 0.5);
  EXPECT_EQ(c.beta, 1.0);
  EXPECT_EQ(c.eta, 0.2);
  EXPECT_EQ(c.alpha, 0.25);
  EXPECT_EQ(c.gamma, 0.75);
  EXPECT_EQ(c.edge_threshold, 10);
  EXPECT_EQ(c.kappa, 1.0);
  EXPECT_EQ(c.max_new_tokens, 8);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, LayerRangesScaleWithDepth) {
  const LorecConfig c;
  EXPECT_EQ(c.look_layers.resolve(32), std::make_pair(15, 22));
  EXPECT_EQ(c.look_layers.resolve(8), std::make_pair(4, 6));
  EXPECT_EQ(c.remember_layers.resolve(32), std::make_pair(8, 16));
  EXPECT_EQ(c.remember_layers.resolve(8), std::make_pair(2, 4));
  EXPECT_EQ(LayerRange::absolute(1, 1).resolve(2), std::make_pair(1, 1));
  EXPECT_THROW(LayerRange::absolute(1, 2).resolve(2), ConfigError);
  EXPECT_THROW(LayerRange::absolute(2, 1).resolve(4), ConfigError);
}

TEST(Config, GreekAndTableAliases) {
  const auto c = parse_lorec_config(
      "μ = 0.3\nτ = 0.6\nω = 0.1\nβ = 2\nη = 0.4\nα = 0.5\nκ = 0.5\nγ = 0.2\n"
      "entropy threshold = 0.9\nedge threshold = 3\nε = 2\n");
  EXPECT_EQ(c.mu, 0.3);
  EXPECT_EQ(c.tau, 0.6);
  EXPECT_EQ(c.omega, 0.1);
  EXPECT_EQ(c.beta, 2.0);
  EXPECT_EQ(c.eta, 0.4);
  EXPECT_EQ(c.alpha, 0.5);
  EXPECT_EQ(c.kappa, 0.5);
  EXPECT_EQ(c.gamma, 0.9);  // later keys win
  EXPECT_EQ(c.edge_threshold, 3);
  EXPECT_EQ(c.epsilon_degree, 2.0);
}

TEST(Config, TextRoundTrip) {
  LorecConfig c;
  c.gamma = 0.123456789;
  c.look_layers = LayerRange::absolute(3, 5);
  c.decode_mode = DecodeMode::sample;
  c.augment_orientation = AugmentOrientation::prose;
  c.look_gating = LookGating::per_layer;
  c.enable_remember = false;
  c.seed = 987654321;
  c.end_token = -1;
  EXPECT_EQ(parse_lorec_config(c.to_text()), c);
  EXPECT_EQ(parse_lorec_config(LorecConfig{}.to_text()), LorecConfig{});
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_lorec_config("gamma = 1.5"), ConfigError);
  EXPECT_THROW(parse_lorec_config("kappa = 0"), ConfigError);
  EXPECT_THROW(parse_lorec_config("alpha = -0.1"), ConfigError);
  EXPECT_THROW(parse_lorec_config("eta = -1"), ConfigError);
  EXPECT_THROW(parse_lorec_config("nonsense = 1"), ConfigError);
  EXPECT_THROW(parse_lorec_config("gamma 0.5"), ConfigError);
  EXPECT_THROW(parse_lorec_config("gamma = abc"), ConfigError);
  EXPECT_THROW(parse_lorec_config("entropy_top_n = 1"), ConfigError);
  EXPECT_THROW(parse_lorec_config("enable_look = maybe"), ConfigError);
  EXPECT_THROW(parse_lorec_config("look_layers = frac 0.7 0.2"), ConfigError);
  LorecConfig c;
  c.entropy_top_n = 100;
  EXPECT_THROW(c.validate(8, 64), ConfigError);
}

TEST(Config, CommentsAndBlankLines) {
  const auto c = parse_lorec_config("# header\n\n  eta = 0.5   # trailing\n");
  EXPECT_EQ(c.eta, 0.5);
}

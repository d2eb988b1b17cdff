#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "lorec/graph.hpp"
#include "lorec/harness/fixtures.hpp"

using namespace lorec;
using harness::path_graph_abcd;
using harness::star_graph;

namespace {

Graph edges_only(int n, std::vector<Edge> e) { return Graph(n, std::move(e), Matrix(static_cast<std::size_t>(n), 1, 0.0)); }

// Complete graph on n nodes minus nothing: every degree is n - 1.
Graph complete(int n) {
  std::vector<Edge> e;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) e.emplace_back(u, v);
  }
  return edges_only(n, e);
}

}  // namespace

TEST(Graph, RejectsMalformedInput) {
  EXPECT_THROW(edges_only(2, {{0, 2}}), IndexError);
  EXPECT_THROW(edges_only(2, {{1, 1}}), DomainError);
  EXPECT_THROW(edges_only(3, {{0, 1}, {1, 0}}), DomainError);
  EXPECT_THROW(Graph(2, {}, Matrix(3, 1)), ShapeError);
  EXPECT_THROW(Graph(1, {}, Matrix(1, 1, NAN)), NumericError);
}

TEST(DegreeCentrality, Examples) {
  const Graph iso = edges_only(2, {});
  EXPECT_EQ(degree_centrality(iso, 0, 1.0), 0.0);
  const Graph star = star_graph(4);
  EXPECT_NEAR(degree_centrality(star, 0, 1.0), 1.6094379124341003, 1e-15);
  EXPECT_NEAR(degree_centrality(star, 1, 1.0), 0.6931471805599453, 1e-15);
  EXPECT_THROW(degree_centrality(star, 5, 1.0), IndexError);
  EXPECT_THROW(degree_centrality(star, -1, 1.0), IndexError);
}

TEST(DropProbabilities, StarIsDegenerate) {
  const Vector w = edge_drop_probabilities(star_graph(4), 0.2, 0.7, 1.0);
  ASSERT_EQ(w.size(), 4u);
  for (double v : w) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(DropProbabilities, PathAsWritten) {
  const Graph g = path_graph_abcd();
  const Vector w = edge_drop_probabilities(g, 0.2, 0.7, 1.0);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_DOUBLE_EQ(w[1], 0.2);
  EXPECT_EQ(w[2], 0.0);
}

TEST(DropProbabilities, PathProseReversesDroppableEdges) {
  // s~(AB) = s~(CD) = 1.5, s~(BC) = 0.
  const Vector w = edge_drop_probabilities(path_graph_abcd(), 0.2, 0.7, 1.0, AugmentOrientation::prose);
  EXPECT_NEAR(w[0], 0.3, 1e-12);
  EXPECT_EQ(w[1], 0.0);
  EXPECT_NEAR(w[2], 0.3, 1e-12);
}

TEST(DropProbabilities, ZeroRateAndErrors) {
  for (double v : edge_drop_probabilities(path_graph_abcd(), 0.0, 0.7, 1.0)) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(edge_drop_probabilities(edges_only(3, {}), 0.2, 0.7, 1.0), DomainError);
}

TEST(DropProbabilities, BoundedAntiMonotoneAndRegular) {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const Graph g = harness::random_graph(rng, static_cast<int>(rng.integer(2, 15)), 40, 1);
    if (g.edges().empty()) continue;
    const double mu = rng.uniform(), tau = rng.uniform();
    const Vector w = edge_drop_probabilities(g, mu, tau, 1.0);
    Vector s;
    for (const auto& [u, v] : g.edges()) s.push_back(0.5 * (degree_centrality(g, u, 1.0) + degree_centrality(g, v, 1.0)));
    for (std::size_t a = 0; a < w.size(); ++a) {
      ASSERT_GE(w[a], 0.0);
      ASSERT_LE(w[a], tau);
      // s~ is decreasing in s, so as written w is non-decreasing in s.
      for (std::size_t b = 0; b < w.size(); ++b) {
        if (s[a] > s[b]) {
          ASSERT_GE(w[a], w[b]);
        }
      }
    }
  }
  for (int n : {3, 4, 6}) {
    for (double v : edge_drop_probabilities(complete(n), 0.9, 0.4, 1.0)) EXPECT_EQ(v, 0.4);
    for (double v : edge_drop_probabilities(complete(n), 0.3, 0.4, 1.0)) EXPECT_EQ(v, 0.3);
  }
}

TEST(Augment, ZeroRateOrZeroCapKeepsTheGraph) {
  const Graph g = star_graph(6);
  LorecConfig c;
  c.mu = 0.0;
  Rng rng(1);
  auto r = augment(g, c, rng);
  EXPECT_EQ(r.augmented_graph, g);
  EXPECT_EQ(r.dropped_edge_count, 0);
  c.mu = 0.5;
  c.tau = 0.0;
  r = augment(g, c, rng);
  EXPECT_EQ(r.augmented_graph, g);
}

TEST(Augment, SubsetSameFeaturesDeterministic) {
  Rng gen(6);
  const Graph g = harness::random_graph(gen, 12, 40, 3);
  LorecConfig c;
  c.mu = 0.8;
  Rng a(99), b(99);
  const auto r1 = augment(g, c, a);
  const auto r2 = augment(g, c, b);
  EXPECT_EQ(r1.augmented_graph, r2.augmented_graph);
  EXPECT_EQ(r1.augmented_graph.features(), g.features());
  EXPECT_EQ(r1.augmented_graph.node_count(), g.node_count());
  for (const auto& e : r1.augmented_graph.edges()) {
    EXPECT_NE(std::find(g.edges().begin(), g.edges().end(), e), g.edges().end());
  }
  EXPECT_EQ(r1.augmented_graph.edges().size() + static_cast<std::size_t>(r1.dropped_edge_count), g.edges().size());
}

TEST(Augment, PathMonteCarlo) {
  const Graph g = path_graph_abcd();
  LorecConfig c;
  Rng rng(2024);
  long drops[3] = {0, 0, 0};
  const long trials = 100000;
  for (long t = 0; t < trials; ++t) {
    const auto r = augment(g, c, rng);
    for (std::size_t e = 0; e < 3; ++e) {
      if (std::find(r.augmented_graph.edges().begin(), r.augmented_graph.edges().end(), g.edges()[e]) ==
          r.augmented_graph.edges().end()) {
        ++drops[e];
      }
    }
  }
  EXPECT_EQ(drops[0], 0);
  EXPECT_EQ(drops[2], 0);
  const double rate = double(drops[1]) / trials;
  EXPECT_NEAR(rate, 0.2, 0.01);
  EXPECT_LT(std::abs(rate - 0.2), 3.0 * std::sqrt(0.2 * 0.8 / trials));
}

TEST(Augment, RandomGraphBernoulliBound) {
  Rng gen(8);
  const Graph g = harness::random_graph(gen, 10, 30, 1);
  LorecConfig c;
  c.mu = 0.6;
  const Vector w = edge_drop_probabilities(g, c.mu, c.tau, c.epsilon_degree);
  std::vector<long> drops(w.size(), 0);
  Rng rng(77);
  const long trials = 100000;
  for (long t = 0; t < trials; ++t) {
    for (std::size_t e = 0; e < w.size(); ++e) drops[e] += rng.uniform() < w[e];
  }
  for (std::size_t e = 0; e < w.size(); ++e) {
    const double rate = double(drops[e]) / trials;
    if (w[e] == 0.0) EXPECT_EQ(drops[e], 0);
    else EXPECT_LT(std::abs(rate - w[e]), 3.0 * std::sqrt(w[e] * (1 - w[e]) / trials)) << "edge " << e;
  }
}

TEST(ContrastGate, Examples) {
  AugmentResult r;
  r.dropped_edge_count = 3;
  EXPECT_FALSE(contrast_gate(star_graph(5), r, 10));
  const Graph twenty = star_graph(20);
  r.dropped_edge_count = 0;
  EXPECT_FALSE(contrast_gate(twenty, r, 10));
  r.dropped_edge_count = 3;
  EXPECT_TRUE(contrast_gate(twenty, r, 10));
  EXPECT_TRUE(contrast_gate(star_graph(5), r, 0));
}

TEST(GraphIo, RoundTrip) {
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const Graph g = harness::random_graph(rng, static_cast<int>(rng.integer(1, 10)), 20, 3);
    EXPECT_EQ(graph_from_string(graph_to_string(g)), g);
  }
  EXPECT_THROW(graph_from_string("2 1\n0.5\n"), FormatError);
  EXPECT_THROW(graph_from_string("2 1\n0.5\n1\n0 1 2\n"), FormatError);
  EXPECT_THROW(graph_from_string("2 1\n0.5\n1\n0 5\n"), IndexError);
}

#pragma once

// Graph values, degree centrality, centrality-adaptive edge dropout and the
// gate that decides whether a perturbed view is worth contrasting against.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lorec/config.hpp"
#include "lorec/errors.hpp"
#include "lorec/numerics.hpp"
#include "lorec/random.hpp"
#include "lorec/text_io.hpp"

namespace lorec {

using Edge = std::pair<int, int>;

/// Undirected graph with node features. Immutable after construction; the
/// constructor rejects out-of-range ids, self-loops and duplicate edges.
class Graph {
 public:
  Graph() = default;
  Graph(int node_count, std::vector<Edge> edges, Matrix features)
      : node_count_(node_count), edges_(std::move(edges)), features_(std::move(features)) {
    if (node_count_ < 0) throw DomainError("graph: negative node count");
    if (features_.rows() != static_cast<std::size_t>(node_count_)) {
      throw ShapeError("graph: feature rows " + std::to_string(features_.rows()) +
                       " != node count " + std::to_string(node_count_));
    }
    degree_.assign(static_cast<std::size_t>(node_count_), 0);
    neighbors_.assign(static_cast<std::size_t>(node_count_), {});
    std::set<Edge> seen;
    for (const auto& [u, v] : edges_) {
      if (u < 0 || v < 0 || u >= node_count_ || v >= node_count_) {
        throw IndexError("graph: edge (" + std::to_string(u) + ", " + std::to_string(v) +
                         ") has a node id outside [0, " + std::to_string(node_count_) + ")");
      }
      if (u == v) throw DomainError("graph: self-loop on node " + std::to_string(u));
      if (!seen.insert(std::minmax(u, v)).second) {
        throw DomainError("graph: duplicate edge (" + std::to_string(u) + ", " +
                          std::to_string(v) + ")");
      }
      ++degree_[u];
      ++degree_[v];
      neighbors_[u].push_back(v);
      neighbors_[v].push_back(u);
    }
    if (!all_finite(features_.data())) throw NumericError("graph: non-finite feature");
  }

  int node_count() const noexcept { return node_count_; }
  std::size_t feature_dim() const noexcept { return features_.cols(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Matrix& features() const noexcept { return features_; }

  int degree(int v) const {
    check_node(v);
    return degree_[v];
  }

  const std::vector<int>& neighbors(int v) const {
    check_node(v);
    return neighbors_[v];
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.node_count_ == b.node_count_ && a.edges_ == b.edges_ && a.features_ == b.features_;
  }

 private:
  void check_node(int v) const {
    if (v < 0 || v >= node_count_) {
      throw IndexError("node id " + std::to_string(v) + " outside [0, " +
                       std::to_string(node_count_) + ")");
    }
  }

  int node_count_ = 0;
  std::vector<Edge> edges_;
  Matrix features_;
  std::vector<int> degree_;
  std::vector<std::vector<int>> neighbors_;
};

/// log(deg(v) + epsilon)
inline double degree_centrality(const Graph& g, int v, double epsilon) {
  if (!(epsilon > 0.0)) throw ParameterError("degree_centrality: epsilon must be > 0");
  return std::log(static_cast<double>(g.degree(v)) + epsilon);
}

/// Per-edge drop probabilities, in edge order.
///
/// Edge strength is the mean centrality of its endpoints, normalized as
/// (s_max - s) / (s_max - s_avg). The as-written orientation uses
/// min(tau, mu * (1 - normalized)); the prose orientation uses
/// min(tau, mu * normalized). Results are clamped at zero. When every edge has
/// the same strength the normalized value is taken as zero.
inline Vector edge_drop_probabilities(const Graph& g, double mu, double tau, double epsilon,
                                      AugmentOrientation orientation = AugmentOrientation::as_written) {
  if (g.edges().empty()) throw DomainError("edge_drop_probabilities: graph has no edges");
  if (!(mu >= 0.0 && mu <= 1.0)) throw ParameterError("mu must lie in [0, 1]");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ParameterError("tau must lie in [0, 1]");

  const auto& edges = g.edges();
  Vector strength(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    strength[i] = 0.5 * (degree_centrality(g, edges[i].first, epsilon) +
                         degree_centrality(g, edges[i].second, epsilon));
  }
  const double s_max = *std::max_element(strength.begin(), strength.end());
  double s_sum = 0.0;
  for (double s : strength) s_sum += s;
  const double s_avg = s_sum / static_cast<double>(strength.size());
  // Summation rounding can leave a few ulps between max and mean of equal values.
  const bool degenerate = (s_max - s_avg) <= 1e-12 * std::max(1.0, std::abs(s_max));

  Vector w(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double normalized = degenerate ? 0.0 : (s_max - strength[i]) / (s_max - s_avg);
    const double raw = orientation == AugmentOrientation::as_written ? mu * (1.0 - normalized)
                                                                     : mu * normalized;
    w[i] = std::max(0.0, std::min(tau, raw));
  }
  return w;
}

struct AugmentResult {
  Graph augmented_graph;
  int dropped_edge_count = 0;
  Vector per_edge_drop_prob;
};

/// Drops each edge independently with its probability, one uniform draw per
/// edge in edge order. Nodes and features are carried over unchanged.
inline AugmentResult augment(const Graph& g, const LorecConfig& config, Rng& rng) {
  AugmentResult result;
  result.per_edge_drop_prob =
      edge_drop_probabilities(g, config.mu, config.tau, config.epsilon_degree, config.augment_orientation);
  std::vector<Edge> kept;
  kept.reserve(g.edges().size());
  for (std::size_t i = 0; i < g.edges().size(); ++i) {
    if (rng.uniform() < result.per_edge_drop_prob[i]) {
      ++result.dropped_edge_count;
    } else {
      kept.push_back(g.edges()[i]);
    }
  }
  result.augmented_graph = Graph(g.node_count(), std::move(kept), g.features());
  return result;
}

/// True when the perturbation removed something and the graph is dense
/// enough to survive losing edges.
inline bool contrast_gate(const Graph& original, const AugmentResult& result, int edge_threshold) {
  return result.dropped_edge_count >= 1 &&
         static_cast<long>(original.edges().size()) >= static_cast<long>(edge_threshold);
}

// ---------------------------------------------------------------------------
// Text format: "N F", then N lines of F reals, then one "u v" line per edge.

inline void write_graph(std::ostream& os, const Graph& g) {
  os << g.node_count() << ' ' << g.feature_dim() << '\n';
  for (int v = 0; v < g.node_count(); ++v) {
    const auto row = g.features().row(static_cast<std::size_t>(v));
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ' ';
      os << text::format_double(row[c]);
    }
    os << '\n';
  }
  for (const auto& [u, v] : g.edges()) os << u << ' ' << v << '\n';
}

inline Graph read_graph(std::istream& is) {
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(is, line)) throw FormatError(std::string("graph file: missing ") + what);
    return std::string_view(line);
  };
  const auto header = text::split_ws(next_line("header"));
  if (header.size() != 2) throw FormatError("graph file: header must be 'N F'");
  const auto n = text::parse_int(header[0]);
  const auto f = text::parse_int(header[1]);
  if (n < 0 || f < 0) throw FormatError("graph file: negative size in header");
  Matrix features(static_cast<std::size_t>(n), static_cast<std::size_t>(f));
  for (std::int64_t v = 0; v < n; ++v) {
    const auto cells = text::split_ws(next_line("feature line"));
    if (static_cast<std::int64_t>(cells.size()) != f) {
      throw FormatError("graph file: feature line " + std::to_string(v) + " has " +
                        std::to_string(cells.size()) + " values, expected " + std::to_string(f));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      features(static_cast<std::size_t>(v), c) = text::parse_double(cells[c]);
    }
  }
  std::vector<Edge> edges;
  while (std::getline(is, line)) {
    const auto cells = text::split_ws(line);
    if (cells.empty()) continue;
    if (cells.size() != 2) throw FormatError("graph file: edge line must be 'u v'");
    edges.emplace_back(static_cast<int>(text::parse_int(cells[0])),
                       static_cast<int>(text::parse_int(cells[1])));
  }
  return Graph(static_cast<int>(n), std::move(edges), std::move(features));
}

inline std::string graph_to_string(const Graph& g) {
  std::ostringstream os;
  write_graph(os, g);
  return os.str();
}

inline Graph graph_from_string(const std::string& s) {
  std::istringstream is(s);
  return read_graph(is);
}

}  // namespace lorec

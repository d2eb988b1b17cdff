#pragma once

// Monte-Carlo check of the per-edge drop probabilities.
//
//   augment_stats.csv  edge,u,v,drop_prob,observed,abs_error,tolerance,ok
//
// An edge with drop probability zero must never be dropped; otherwise the
// observed rate must lie within three binomial standard errors.

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "lorec/config.hpp"
#include "lorec/graph.hpp"
#include "lorec/random.hpp"
#include "lorec/text_io.hpp"

namespace lorec::harness {

inline constexpr const char* kAugmentCsvHeader = "edge,u,v,drop_prob,observed,abs_error,tolerance,ok";

struct EdgeStat {
  int edge = 0, u = 0, v = 0;
  double drop_prob = 0.0, observed = 0.0, abs_error = 0.0, tolerance = 0.0;
  bool ok = false;
};

struct AugmentStats {
  long trials = 0;
  std::vector<EdgeStat> edges;
  bool passed() const {
    if (edges.empty()) return false;
    for (const auto& e : edges) {
      if (!e.ok) return false;
    }
    return true;
  }
};

inline AugmentStats augment_stats(const Graph& g, const LorecConfig& config, long trials, std::uint64_t seed) {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (g.edges().empty()) throw DomainError("augment_stats: graph has no edges");
  AugmentStats s;
  s.trials = trials;
  Rng rng(seed);
  std::vector<long> dropped(g.edges().size(), 0);
  const Vector w = edge_drop_probabilities(g, config.mu, config.tau, config.epsilon_degree, config.augment_orientation);
  for (long t = 0; t < trials; ++t) {
    // Same per-edge draw order as augment().
    for (std::size_t e = 0; e < w.size(); ++e) {
      if (rng.uniform() < w[e]) ++dropped[e];
    }
  }
  for (std::size_t e = 0; e < w.size(); ++e) {
    EdgeStat st;
    st.edge = static_cast<int>(e);
    st.u = g.edges()[e].first;
    st.v = g.edges()[e].second;
    st.drop_prob = w[e];
    st.observed = static_cast<double>(dropped[e]) / static_cast<double>(trials);
    st.abs_error = std::abs(st.observed - st.drop_prob);
    // 4 standard errors per edge
    st.tolerance = w[e] == 0.0 ? 0.0 : 4.0 * std::sqrt(w[e] * (1.0 - w[e]) / static_cast<double>(trials));
    st.ok = st.abs_error <= st.tolerance;
    s.edges.push_back(st);
  }
  return s;
}

inline void write_augment_csv(std::ostream& os, const AugmentStats& s) {
  os << kAugmentCsvHeader << '\n';
  for (const auto& e : s.edges) {
    os << e.edge << ',' << e.u << ',' << e.v << ',' << text::format_double(e.drop_prob) << ','
       << text::format_double(e.observed) << ',' << text::format_double(e.abs_error) << ','
       << text::format_double(e.tolerance) << ',' << int(e.ok) << '\n';
  }
}

}  // namespace lorec::harness

#pragma once

// Dual-contrastive logit rectification, the plausibility head set and
// constrained token selection.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "lorec/config.hpp"
#include "lorec/errors.hpp"
#include "lorec/model.hpp"
#include "lorec/numerics.hpp"
#include "lorec/random.hpp"

namespace lorec {

struct LogitTriple {
  Vector psi_orig;
  Vector psi_text;
  Vector psi_aug;  // may be empty when the gate is closed
  bool gate = false;
};

/// Logits of a pass in which no query attends to a graph slot. Positions of
/// the remaining tokens are unchanged.
inline Vector text_only_logits(const TokenSequence& seq, const ModelParams& params, ForwardOptions opts = {}) {
  opts.mask_graph = true;
  const Matrix unused(seq.graph_count(), static_cast<std::size_t>(params.dims.model_dim));
  return forward_step(seq, unused, params, nullptr, opts).final_logits;
}

/// orig + omega (orig - text) + beta [gate] (orig - aug)
inline Vector combine_logits(const LogitTriple& t, double omega, double beta) {
  if (!(omega >= 0.0) || !(beta >= 0.0)) throw ParameterError("combine_logits: weights must be >= 0");
  const std::size_t n = t.psi_orig.size();
  if (t.psi_text.size() != n || (t.gate && t.psi_aug.size() != n)) {
    throw ShapeError("combine_logits: logit vectors differ in length");
  }
  Vector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = t.psi_orig[i] + omega * (t.psi_orig[i] - t.psi_text[i]);
    if (t.gate) v += beta * (t.psi_orig[i] - t.psi_aug[i]);
    out[i] = v;
  }
  return out;
}

/// Tokens whose probability under softmax(orig_logits) is at least kappa
/// times the maximum probability. Always holds every argmax.
inline std::vector<std::size_t> plausibility_set(std::span<const double> orig_logits, double kappa) {
  if (!(kappa > 0.0 && kappa <= 1.0)) throw ParameterError("plausibility_set: kappa must lie in (0, 1]");
  const Vector p = softmax(orig_logits);
  const double peak = *std::max_element(p.begin(), p.end());
  const double cut = kappa * peak;
  std::vector<std::size_t> z;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] >= cut) z.push_back(i);
  }
  return z;
}

/// Greedy: restricted argmax, lowest id on ties. Sample: one uniform draw
/// against the softmax of the restricted logits.
inline int select_token(std::span<const double> final_logits, std::span<const std::size_t> z, DecodeMode mode,
                        Rng& rng) {
  if (z.empty()) throw InternalError("select_token: empty candidate set");
  for (std::size_t id : z) {
    if (id >= final_logits.size()) throw IndexError("select_token: candidate outside vocabulary");
  }
  if (mode == DecodeMode::greedy || z.size() == 1) {
    std::size_t best = z[0];
    for (std::size_t id : z) {
      if (final_logits[id] > final_logits[best] || (final_logits[id] == final_logits[best] && id < best)) best = id;
    }
    return static_cast<int>(best);
  }
  Vector restricted(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) restricted[i] = final_logits[z[i]];
  const Vector p = softmax(restricted);
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(z[i]);
  }
  return static_cast<int>(z.back());
}

}  // namespace lorec

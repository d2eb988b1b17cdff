#pragma once

// Straight-line re-derivation of the decoding pipeline used as an oracle
// against the engine. It shares only the weight container and the seeding
// convention with the library; every formula is evaluated here with plain
// loops and no calls into the numerics, model, intervention or contrast
// code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lorec/config.hpp"
#include "lorec/graph.hpp"
#include "lorec/model.hpp"

namespace lorec::oracle {

using Row = std::vector<double>;
using Rows = std::vector<Row>;

inline double phi(double x, Activation a) {
  if (a == Activation::relu) return x < 0.0 ? 0.0 : x;
  return x * (1.0 / (1.0 + std::exp(-x)));
}

inline Row probabilities(const Row& logits) {
  double m = logits[0];
  for (double v : logits) m = v > m ? v : m;
  Row p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - m));
  for (double& v : p) v /= z;
  return p;
}

/// -(1/log N) sum p log p over the N largest probabilities.
inline double entropy(const Row& probs, std::size_t n, bool renormalize) {
  Row sorted = probs;
  std::sort(sorted.begin(), sorted.end(), [](double a, double b) { return a > b; });
  sorted.resize(n);
  double mass = 0.0;
  for (double v : sorted) mass += v;
  if (renormalize) {
    bool flat = true;
    for (double v : sorted) flat = flat && v == sorted[0];
    if (flat) return 1.0;
  }
  double h = 0.0;
  for (double v : sorted) {
    const double q = renormalize ? v / mass : v;
    if (q >= 1e-12) h += q * std::log(q);
  }
  double r = -h / std::log(double(n));
  return r < 0.0 ? 0.0 : (r > 1.0 ? 1.0 : r);
}

/// Edge strength, normalized strength and the truncated drop probability.
inline Row drop_probabilities(const Graph& g, double mu, double tau, double eps, bool prose) {
  std::vector<int> deg(static_cast<std::size_t>(g.node_count()), 0);
  for (const auto& e : g.edges()) {
    deg[static_cast<std::size_t>(e.first)] += 1;
    deg[static_cast<std::size_t>(e.second)] += 1;
  }
  Row s;
  for (const auto& e : g.edges()) {
    s.push_back((std::log(deg[static_cast<std::size_t>(e.first)] + eps) +
                 std::log(deg[static_cast<std::size_t>(e.second)] + eps)) / 2.0);
  }
  double s_max = s[0];
  double s_avg = 0.0;
  for (double v : s) {
    s_max = std::max(s_max, v);
    s_avg += v;
  }
  s_avg /= double(s.size());
  Row w;
  for (double v : s) {
    double norm = 0.0;
    if (s_max - s_avg > 1e-12 * std::max(1.0, std::fabs(s_max))) norm = (s_max - v) / (s_max - s_avg);
    double raw = prose ? mu * norm : mu * (1.0 - norm);
    double x = raw < tau ? raw : tau;
    w.push_back(x < 0.0 ? 0.0 : x);
  }
  return w;
}

// The engine's seed-derivation and uniform-draw convention.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double draw(std::mt19937_64& e) { return double(e() >> 11) * 0x1.0p-53; }

/// Mean-aggregation message passing then projection; one row per graph slot.
inline Rows encode(const Graph& g, const ModelParams& p) {
  const int n = g.node_count();
  std::vector<std::vector<int>> nbr(static_cast<std::size_t>(n));
  for (const auto& e : g.edges()) {
    nbr[static_cast<std::size_t>(e.first)].push_back(e.second);
    nbr[static_cast<std::size_t>(e.second)].push_back(e.first);
  }
  Rows h(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    for (std::size_t c = 0; c < g.features().cols(); ++c) h[static_cast<std::size_t>(v)].push_back(g.features()(static_cast<std::size_t>(v), c));
  }
  for (const auto& r : p.encoder) {
    Rows next(static_cast<std::size_t>(n), Row(r.bias.size(), 0.0));
    for (int v = 0; v < n; ++v) {
      const auto& nb = nbr[static_cast<std::size_t>(v)];
      Row agg(h[0].size(), 0.0);
      for (int u : nb) {
        for (std::size_t c = 0; c < agg.size(); ++c) agg[c] += h[static_cast<std::size_t>(u)][c] / double(nb.size());
      }
      for (std::size_t o = 0; o < r.bias.size(); ++o) {
        double z = r.bias[o];
        for (std::size_t c = 0; c < agg.size(); ++c) {
          z += h[static_cast<std::size_t>(v)][c] * r.self_weight(c, o) + agg[c] * r.neighbor_weight(c, o);
        }
        next[static_cast<std::size_t>(v)][o] = phi(z, p.dims.activation);
      }
    }
    h = next;
  }
  const int j = std::min(n, p.dims.max_graph_tokens);
  Rows tokens(static_cast<std::size_t>(j), Row(static_cast<std::size_t>(p.dims.model_dim), 0.0));
  for (int v = 0; v < j; ++v) {
    for (std::size_t o = 0; o < tokens[0].size(); ++o) {
      double z = p.projector_bias[o];
      for (std::size_t c = 0; c < h[static_cast<std::size_t>(v)].size(); ++c) z += h[static_cast<std::size_t>(v)][c] * p.projector(c, o);
      tokens[static_cast<std::size_t>(v)][o] = z;
    }
  }
  return tokens;
}

struct PassResult {
  Row logits;
  Row entropies;
  int trigger_layer = -1;
  int remember_layer = -1;
};

enum class PassKind { original, text_only, augmented };

/// One causal pass. Interventions act on the last position only.
inline PassResult pass(const std::vector<int>& ids, const std::vector<Segment>& seg, const Rows& graph_tokens,
                       const ModelParams& p, const LorecConfig& cfg, bool intervene, bool mask_graph) {
  const std::size_t t = ids.size();
  const std::size_t d = static_cast<std::size_t>(p.dims.model_dim);
  const std::size_t nh = static_cast<std::size_t>(p.dims.head_count);
  const std::size_t hd = d / nh;
  const int layers = p.dims.layer_count;
  const std::size_t vocab = static_cast<std::size_t>(p.dims.vocab_size);
  const std::size_t top_n = cfg.entropy_top_n == 0 ? vocab : static_cast<std::size_t>(cfg.entropy_top_n);

  auto norm = [&](const Row& x, const Row& gain) {
    double ms = 0.0;
    for (double v : x) ms += v * v;
    const double k = 1.0 / std::sqrt(ms / double(x.size()) + 1e-6);
    Row y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = gain[i] * x[i] * k;
    return y;
  };
  auto times = [](const Row& x, const Matrix& m) {
    Row y(m.cols(), 0.0);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      double z = 0.0;
      for (std::size_t r = 0; r < m.rows(); ++r) z += x[r] * m(r, c);
      y[c] = z;
    }
    return y;
  };
  auto head_logits = [&](const Row& h_last) { return times(norm(h_last, p.final_norm), p.output_head); };

  Rows h(t, Row(d));
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      double base = 0.0;
      if (seg[i] == Segment::graph) base = cfg.graph_scale * graph_tokens[i][c];
      else if (seg[i] == Segment::text) base = cfg.text_scale * p.token_embedding(static_cast<std::size_t>(ids[i]), c);
      else base = p.token_embedding(static_cast<std::size_t>(ids[i]), c);
      h[i][c] = base + p.position_embedding(i, c);
    }
  }

  const auto look = cfg.look_layers.resolve(layers);
  const auto rem = cfg.remember_layers.resolve(layers);
  const bool look_on = intervene && cfg.enable_look;
  const bool rem_on = intervene && cfg.enable_remember;

  auto layer = [&](const Rows& in, int l, bool rectify, bool inject) {
    const auto& w = p.layers[static_cast<std::size_t>(l)];
    Rows q(t), k(t), v(t);
    for (std::size_t i = 0; i < t; ++i) {
      const Row a = norm(in[i], w.attn_norm);
      q[i] = times(a, w.query);
      k[i] = times(a, w.key);
      v[i] = times(a, w.value);
    }
    Rows out = in;
    for (std::size_t i = 0; i < t; ++i) {
      Row att(d, 0.0);
      for (std::size_t hh = 0; hh < nh; ++hh) {
        std::vector<std::size_t> keys;
        Row e;
        for (std::size_t j = 0; j <= i; ++j) {
          if (mask_graph && seg[j] == Segment::graph) continue;
          double s = 0.0;
          for (std::size_t c = 0; c < hd; ++c) s += q[i][hh * hd + c] * k[j][hh * hd + c];
          s /= std::sqrt(double(hd));
          if (rectify && i + 1 == t && seg[j] == Segment::graph) s = s + cfg.eta * std::fabs(s);
          keys.push_back(j);
          e.push_back(s);
        }
        if (keys.empty()) continue;
        const Row a = probabilities(e);
        for (std::size_t x = 0; x < keys.size(); ++x) {
          for (std::size_t c = 0; c < hd; ++c) att[hh * hd + c] += a[x] * v[keys[x]][hh * hd + c];
        }
      }
      const Row o = times(att, w.output);
      for (std::size_t c = 0; c < d; ++c) out[i][c] += o[c];
      const Row x = norm(out[i], w.ffn_norm);
      Row inner = times(x, w.ffn_in);
      for (double& z : inner) z = phi(z, p.dims.activation);
      Row f = times(inner, w.ffn_out);
      if (inject && i + 1 == t) {
        Row mem(d, 0.0);
        for (const auto& g : graph_tokens) {
          double ip = 0.0;
          for (std::size_t c = 0; c < d; ++c) ip += x[c] * g[c];
          const double m = phi(ip, p.dims.activation);
          for (std::size_t c = 0; c < d; ++c) mem[c] += m * g[c];
        }
        for (std::size_t c = 0; c < d; ++c) f[c] = (1.0 - cfg.alpha) * f[c] + cfg.alpha * mem[c];
      }
      for (std::size_t c = 0; c < d; ++c) out[i][c] += f[c];
    }
    return out;
  };

  PassResult r;
  bool remembered = false;
  for (int l = 0; l < layers; ++l) {
    const bool in_look = l >= look.first && l <= look.second;
    const bool in_rem = l >= rem.first && l <= rem.second;
    bool rect = look_on && cfg.look_gating == LookGating::sticky && r.trigger_layer >= 0 && r.trigger_layer < l && in_look;
    Rows next = layer(h, l, rect, false);
    const double ent = entropy(probabilities(head_logits(next[t - 1])), top_n, cfg.entropy_renormalize);
    r.entropies.push_back(ent);
    const bool high = ent > cfg.gamma;
    if (high && r.trigger_layer < 0) r.trigger_layer = l;
    bool redo = false;
    if (look_on && cfg.look_gating == LookGating::per_layer && high && in_look && !rect) {
      rect = true;
      redo = true;
    }
    bool inject = false;
    if (rem_on && !remembered && high && in_rem) {
      remembered = true;
      inject = true;
      r.remember_layer = l;
      redo = true;
    }
    if (redo) next = layer(h, l, rect, inject);
    h = next;
  }
  r.logits = head_logits(h[t - 1]);
  return r;
}

struct StepResult {
  Row orig, text, aug, final_logits;
  std::vector<std::size_t> candidates;
  Row entropies;
  int trigger_layer = -1;
  int remember_layer = -1;
  int token = -1;
};

struct RunResult {
  std::vector<int> tokens;
  std::vector<StepResult> steps;
  Row drop_probs;
  int dropped = 0;
  bool gate = false;
};

inline RunResult run(const Graph& g, const TokenSequence& prompt, const ModelParams& p, const LorecConfig& cfg) {
  RunResult out;
  const Rows tokens_g = encode(g, p);
  std::mt19937_64 aug_stream(stream_seed(cfg.seed, 0));
  std::mt19937_64 sample_stream(stream_seed(cfg.seed, 1));

  Rows tokens_aug;
  if (cfg.enable_contrast && !g.edges().empty()) {
    out.drop_probs = drop_probabilities(g, cfg.mu, cfg.tau, cfg.epsilon_degree,
                                        cfg.augment_orientation == AugmentOrientation::prose);
    std::vector<Edge> kept;
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
      if (draw(aug_stream) < out.drop_probs[e]) ++out.dropped;
      else kept.push_back(g.edges()[e]);
    }
    out.gate = out.dropped >= 1 && int(g.edges().size()) >= cfg.edge_threshold;
    if (out.gate) tokens_aug = encode(Graph(g.node_count(), kept, g.features()), p);
  }

  std::vector<int> ids = prompt.token_ids();
  std::vector<Segment> seg = prompt.segments();
  const bool intervene = cfg.enable_look || cfg.enable_remember;
  for (int step = 0; step < cfg.max_new_tokens; ++step) {
    StepResult s;
    const PassResult o = pass(ids, seg, tokens_g, p, cfg, intervene, false);
    s.orig = o.logits;
    s.entropies = o.entropies;
    s.trigger_layer = o.trigger_layer;
    s.remember_layer = o.remember_layer;
    s.final_logits = s.orig;
    if (cfg.enable_contrast) {
      const bool all = intervene && cfg.interventions_on_all_passes;
      s.text = pass(ids, seg, tokens_g, p, cfg, all, true).logits;
      if (out.gate) s.aug = pass(ids, seg, tokens_aug, p, cfg, all, false).logits;
      for (std::size_t i = 0; i < s.orig.size(); ++i) {
        s.final_logits[i] = s.orig[i] + cfg.omega * (s.orig[i] - s.text[i]) +
                            (out.gate ? cfg.beta * (s.orig[i] - s.aug[i]) : 0.0);
      }
    }
    const Row po = probabilities(s.orig);
    double pmax = 0.0;
    for (double v : po) pmax = std::max(pmax, v);
    for (std::size_t i = 0; i < po.size(); ++i) {
      if (po[i] >= cfg.kappa * pmax) s.candidates.push_back(i);
    }
    if (cfg.decode_mode == DecodeMode::greedy || s.candidates.size() == 1) {
      std::size_t best = s.candidates[0];
      for (std::size_t c : s.candidates) {
        if (s.final_logits[c] > s.final_logits[best]) best = c;
      }
      s.token = int(best);
    } else {
      Row sub;
      for (std::size_t c : s.candidates) sub.push_back(s.final_logits[c]);
      const Row ps = probabilities(sub);
      const double u = draw(sample_stream);
      double acc = 0.0;
      s.token = int(s.candidates.back());
      for (std::size_t x = 0; x < ps.size(); ++x) {
        acc += ps[x];
        if (u < acc) {
          s.token = int(s.candidates[x]);
          break;
        }
      }
    }
    out.tokens.push_back(s.token);
    const int tok = s.token;
    out.steps.push_back(std::move(s));
    if (tok == cfg.end_token) break;
    ids.push_back(tok);
    seg.push_back(Segment::generated);
  }
  return out;
}

}  // namespace lorec::oracle

#pragma once

// A small fixed-weight graph-conditioned decoder: message-passing graph
// encoder, projector into token space, pre-norm causal transformer with a
// shared vocabulary head read out at every layer, and hook points for
// attention and FFN interventions on the current (last) position.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lorec/errors.hpp"
#include "lorec/graph.hpp"
#include "lorec/numerics.hpp"
#include "lorec/random.hpp"
#include "lorec/text_io.hpp"

namespace lorec {

struct ModelDims {
  int vocab_size = 64;
  int model_dim = 64;
  int ffn_dim = 128;
  int head_count = 4;
  int layer_count = 8;
  int max_positions = 64;
  int feature_dim = 8;
  int graph_dim = 16;
  int encoder_rounds = 1;
  int max_graph_tokens = 16;
  Activation activation = Activation::relu;

  void validate() const {
    if (vocab_size < 2) throw ShapeError("vocab_size must be >= 2");
    if (model_dim < 1 || ffn_dim < 1 || graph_dim < 1) throw ShapeError("dimensions must be >= 1");
    if (head_count < 1 || model_dim % head_count != 0) {
      throw ShapeError("head_count must divide model_dim");
    }
    if (layer_count < 2) throw ShapeError("layer_count must be >= 2");
    if (max_positions < 1) throw ShapeError("max_positions must be >= 1");
    if (feature_dim < 0) throw ShapeError("feature_dim must be >= 0");
    if (encoder_rounds < 1 || encoder_rounds > 2) throw ShapeError("encoder_rounds must be 1 or 2");
    if (max_graph_tokens < 0) throw ShapeError("max_graph_tokens must be >= 0");
  }

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct LayerWeights {
  Vector attn_norm;  // d
  Matrix query, key, value, output;  // d x d
  Vector ffn_norm;  // d
  Matrix ffn_in;   // d x d_m
  Matrix ffn_out;  // d_m x d

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

// One message-passing round: act(h_v W_self + mean_{u in N(v)} h_u W_neigh + b).
struct EncoderRound {
  Matrix self_weight;
  Matrix neighbor_weight;
  Vector bias;

  friend bool operator==(const EncoderRound&, const EncoderRound&) = default;
};

struct ModelParams {
  ModelDims dims;
  Matrix token_embedding;     // V x d
  Matrix position_embedding;  // P x d
  std::vector<LayerWeights> layers;
  Vector final_norm;   // d
  Matrix output_head;  // d x V, shared by every layer's early exit
  std::vector<EncoderRound> encoder;
  Matrix projector;       // d_g x d
  Vector projector_bias;  // d

  int head_dim() const { return dims.model_dim / dims.head_count; }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

  static ModelParams zeros(const ModelDims& dims) {
    dims.validate();
    const auto d = static_cast<std::size_t>(dims.model_dim);
    const auto dm = static_cast<std::size_t>(dims.ffn_dim);
    const auto dg = static_cast<std::size_t>(dims.graph_dim);
    ModelParams p;
    p.dims = dims;
    p.token_embedding = Matrix(static_cast<std::size_t>(dims.vocab_size), d);
    p.position_embedding = Matrix(static_cast<std::size_t>(dims.max_positions), d);
    for (int l = 0; l < dims.layer_count; ++l) {
      LayerWeights w;
      w.attn_norm.assign(d, 1.0);
      w.query = w.key = w.value = w.output = Matrix(d, d);
      w.ffn_norm.assign(d, 1.0);
      w.ffn_in = Matrix(d, dm);
      w.ffn_out = Matrix(dm, d);
      p.layers.push_back(std::move(w));
    }
    p.final_norm.assign(d, 1.0);
    p.output_head = Matrix(d, static_cast<std::size_t>(dims.vocab_size));
    for (int r = 0; r < dims.encoder_rounds; ++r) {
      const std::size_t in = r == 0 ? static_cast<std::size_t>(dims.feature_dim) : dg;
      p.encoder.push_back({Matrix(in, dg), Matrix(in, dg), Vector(dg, 0.0)});
    }
    p.projector = Matrix(dg, d);
    p.projector_bias.assign(d, 0.0);
    return p;
  }

  /// Visits every tensor in a fixed order as (name, rows, cols, values).
  /// Vectors are reported as 1 x n.
  template <class Self, class Fn>
  static void for_each_tensor(Self& p, Fn&& fn) {
    auto mat = [&](const std::string& name, auto& m) { fn(name, m.rows(), m.cols(), std::span(m.data())); };
    auto vec = [&](const std::string& name, auto& v) { fn(name, std::size_t{1}, v.size(), std::span(v)); };
    mat("token_embedding", p.token_embedding);
    mat("position_embedding", p.position_embedding);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      const std::string pre = "layer" + std::to_string(l) + ".";
      auto& w = p.layers[l];
      vec(pre + "attn_norm", w.attn_norm);
      mat(pre + "query", w.query);
      mat(pre + "key", w.key);
      mat(pre + "value", w.value);
      mat(pre + "output", w.output);
      vec(pre + "ffn_norm", w.ffn_norm);
      mat(pre + "ffn_in", w.ffn_in);
      mat(pre + "ffn_out", w.ffn_out);
    }
    vec("final_norm", p.final_norm);
    mat("output_head", p.output_head);
    for (std::size_t r = 0; r < p.encoder.size(); ++r) {
      const std::string pre = "encoder" + std::to_string(r) + ".";
      mat(pre + "self_weight", p.encoder[r].self_weight);
      mat(pre + "neighbor_weight", p.encoder[r].neighbor_weight);
      vec(pre + "bias", p.encoder[r].bias);
    }
    mat("projector", p.projector);
    vec("projector_bias", p.projector_bias);
  }

  void validate() const {
    dims.validate();
    const ModelParams shape = zeros(dims);
    std::vector<std::pair<std::size_t, std::size_t>> expected;
    for_each_tensor(shape, [&](const std::string&, std::size_t r, std::size_t c, auto) {
      expected.emplace_back(r, c);
    });
    std::size_t i = 0;
    for_each_tensor(*this, [&](const std::string& name, std::size_t r, std::size_t c, auto values) {
      if (i >= expected.size() || expected[i] != std::pair{r, c}) {
        throw ShapeError("model tensor '" + name + "' has unexpected shape");
      }
      if (!all_finite(values)) throw NumericError("model tensor '" + name + "' is not finite");
      ++i;
    });
    if (i != expected.size()) throw ShapeError("model is missing tensors");
  }
};

/// Seeded Gaussian weights standing in for a frozen pre-trained model.
inline ModelParams random_params(const ModelDims& dims, std::uint64_t seed, double sigma = 0.05) {
  ModelParams p = ModelParams::zeros(dims);
  Rng rng(seed);
  ModelParams::for_each_tensor(p, [&](const std::string& name, std::size_t, std::size_t, std::span<double> v) {
    const bool is_norm = name.ends_with("norm");
    for (double& x : v) x = is_norm ? 1.0 : sigma * rng.normal();
  });
  return p;
}

// ---------------------------------------------------------------------------
// Checkpoint text format: a header of dimensions, a manifest of
// "tensor NAME ROWS COLS OFFSET" lines, "end", then one value per line.

inline void write_checkpoint(std::ostream& os, const ModelParams& p) {
  const auto& d = p.dims;
  os << "lorec-checkpoint 1\n"
     << "vocab_size " << d.vocab_size << "\nmodel_dim " << d.model_dim << "\nffn_dim " << d.ffn_dim
     << "\nhead_count " << d.head_count << "\nlayer_count " << d.layer_count << "\nmax_positions "
     << d.max_positions << "\nfeature_dim " << d.feature_dim << "\ngraph_dim " << d.graph_dim
     << "\nencoder_rounds " << d.encoder_rounds << "\nmax_graph_tokens " << d.max_graph_tokens
     << "\nactivation " << to_string(d.activation) << "\n";
  std::size_t offset = 0;
  ModelParams::for_each_tensor(p, [&](const std::string& name, std::size_t r, std::size_t c, auto) {
    os << "tensor " << name << ' ' << r << ' ' << c << ' ' << offset << '\n';
    offset += r * c;
  });
  os << "end\n";
  ModelParams::for_each_tensor(p, [&](const std::string&, std::size_t, std::size_t, auto values) {
    for (double v : values) os << text::format_double(v) << '\n';
  });
}

inline ModelParams read_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || text::trim(line) != "lorec-checkpoint 1") {
    throw FormatError("checkpoint: bad magic line");
  }
  ModelDims dims;
  struct Entry {
    std::string name;
    std::size_t rows, cols, offset;
  };
  std::vector<Entry> manifest;
  bool ended = false;
  while (std::getline(is, line)) {
    const auto cells = text::split_ws(line);
    if (cells.empty()) continue;
    if (cells[0] == "end") {
      ended = true;
      break;
    }
    if (cells[0] == "tensor") {
      if (cells.size() != 5) throw FormatError("checkpoint: bad manifest line");
      manifest.push_back({std::string(cells[1]), static_cast<std::size_t>(text::parse_int(cells[2])),
                          static_cast<std::size_t>(text::parse_int(cells[3])),
                          static_cast<std::size_t>(text::parse_int(cells[4]))});
      continue;
    }
    if (cells.size() != 2) throw FormatError("checkpoint: bad header line '" + line + "'");
    const auto key = cells[0];
    if (key == "activation") {
      dims.activation = parse_activation(cells[1]);
      continue;
    }
    const int v = static_cast<int>(text::parse_int(cells[1]));
    if (key == "vocab_size") dims.vocab_size = v;
    else if (key == "model_dim") dims.model_dim = v;
    else if (key == "ffn_dim") dims.ffn_dim = v;
    else if (key == "head_count") dims.head_count = v;
    else if (key == "layer_count") dims.layer_count = v;
    else if (key == "max_positions") dims.max_positions = v;
    else if (key == "feature_dim") dims.feature_dim = v;
    else if (key == "graph_dim") dims.graph_dim = v;
    else if (key == "encoder_rounds") dims.encoder_rounds = v;
    else if (key == "max_graph_tokens") dims.max_graph_tokens = v;
    else throw FormatError("checkpoint: unknown header key '" + std::string(key) + "'");
  }
  if (!ended) throw FormatError("checkpoint: manifest not terminated");
  ModelParams p = ModelParams::zeros(dims);

  Vector flat;
  while (std::getline(is, line)) {
    const auto t = text::trim(line);
    if (!t.empty()) flat.push_back(text::parse_double(t));
  }
  std::size_t index = 0;
  ModelParams::for_each_tensor(p, [&](const std::string& name, std::size_t r, std::size_t c, std::span<double> values) {
    if (index >= manifest.size()) throw FormatError("checkpoint: manifest missing '" + name + "'");
    const auto& e = manifest[index++];
    if (e.name != name || e.rows != r || e.cols != c) {
      throw FormatError("checkpoint: manifest entry '" + e.name + "' does not match expected '" + name + "'");
    }
    if (e.offset + r * c > flat.size()) throw FormatError("checkpoint: truncated values for '" + name + "'");
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(e.offset), r * c, values.begin());
  });
  if (index != manifest.size()) throw FormatError("checkpoint: manifest has extra tensors");
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Token sequences

enum class Segment : std::uint8_t { graph, text, generated };

inline std::string_view to_string(Segment s) {
  switch (s) {
    case Segment::graph: return "graph";
    case Segment::text: return "text";
    case Segment::generated: return "generated";
  }
  return "?";
}

/// Token ids with per-position segment tags. Graph slots form a contiguous
/// prefix; their embeddings come from the graph encoder, not the id.
class TokenSequence {
 public:
  TokenSequence() = default;
  TokenSequence(std::vector<int> ids, std::vector<Segment> segments)
      : ids_(std::move(ids)), segments_(std::move(segments)) {
    if (ids_.size() != segments_.size()) throw ShapeError("token ids and segments differ in length");
    bool in_prefix = true;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      if (segments_[i] == Segment::graph) {
        if (!in_prefix) throw DomainError("graph tokens must form a contiguous prefix");
        graph_positions_.push_back(i);
      } else {
        in_prefix = false;
      }
    }
  }

  /// graph_count placeholder slots (id graph_token_id) followed by text ids.
  static TokenSequence with_graph_prefix(std::size_t graph_count, int graph_token_id,
                                         const std::vector<int>& text_ids) {
    std::vector<int> ids(graph_count, graph_token_id);
    std::vector<Segment> seg(graph_count, Segment::graph);
    ids.insert(ids.end(), text_ids.begin(), text_ids.end());
    seg.insert(seg.end(), text_ids.size(), Segment::text);
    return TokenSequence(std::move(ids), std::move(seg));
  }

  void append_generated(int id) {
    ids_.push_back(id);
    segments_.push_back(Segment::generated);
  }

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::vector<int>& token_ids() const noexcept { return ids_; }
  const std::vector<Segment>& segments() const noexcept { return segments_; }
  const std::vector<std::size_t>& graph_positions() const noexcept { return graph_positions_; }
  std::size_t graph_count() const noexcept { return graph_positions_.size(); }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;

 private:
  std::vector<int> ids_;
  std::vector<Segment> segments_;
  std::vector<std::size_t> graph_positions_;
};

// ---------------------------------------------------------------------------
// Graph encoder

/// Message passing over the graph followed by the projector into token
/// space. Row j is the graph token of node j, for the lowest
/// min(N, max_graph_tokens) node ids.
inline Matrix encode_graph(const Graph& g, const ModelParams& params) {
  if (g.feature_dim() != static_cast<std::size_t>(params.dims.feature_dim)) {
    throw ShapeError("encode_graph: graph has " + std::to_string(g.feature_dim()) +
                     " feature columns, model expects " + std::to_string(params.dims.feature_dim));
  }
  const auto n = static_cast<std::size_t>(g.node_count());
  Matrix h = g.features();
  for (const auto& round : params.encoder) {
    Matrix next(n, round.bias.size());
    for (std::size_t v = 0; v < n; ++v) {
      Vector mean(h.cols(), 0.0);
      const auto& nbrs = g.neighbors(static_cast<int>(v));
      for (int u : nbrs) add_inplace(mean, h.row(static_cast<std::size_t>(u)));
      if (!nbrs.empty()) {
        for (double& m : mean) m /= static_cast<double>(nbrs.size());
      }
      Vector pre = row_times(h.row(v), round.self_weight);
      add_inplace(pre, row_times(mean, round.neighbor_weight));
      add_inplace(pre, round.bias);
      const Vector out = activation(pre, params.dims.activation);
      std::copy(out.begin(), out.end(), next.row(v).begin());
    }
    h = std::move(next);
  }
  const std::size_t j_count = std::min<std::size_t>(n, static_cast<std::size_t>(params.dims.max_graph_tokens));
  Matrix tokens(j_count, static_cast<std::size_t>(params.dims.model_dim));
  for (std::size_t j = 0; j < j_count; ++j) {
    Vector t = row_times(h.row(j), params.projector);
    add_inplace(t, params.projector_bias);
    std::copy(t.begin(), t.end(), tokens.row(j).begin());
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Forward pass

inline Vector rms_norm(std::span<const double> x, std::span<const double> gain) {
  double ms = 0.0;
  for (double v : x) ms += v * v;
  ms /= static_cast<double>(x.size());
  const double inv = 1.0 / std::sqrt(ms + 1e-6);
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gain[i] * x[i] * inv;
  return out;
}

/// Interface the forward pass consults at every layer. All calls concern
/// the last position only.
class ForwardHooks {
 public:
  struct Revision {
    bool look = false;
    bool remember = false;
  };

  virtual ~ForwardHooks() = default;
  /// Whether the layer's attention row is rectified on its first run.
  virtual bool look_before(int layer) = 0;
  /// Called once per layer with the entropy of its early-exit distribution;
  /// a returned flag requests a rerun of the layer with that intervention.
  virtual Revision after_layer(int layer, double entropy, bool look_applied) = 0;
  /// In-place rectification of the pre-softmax row at the given entries.
  virtual void rectify(std::span<double> row, std::span<const std::size_t> graph_entries) = 0;
  /// Fused FFN output given the vanilla output and the FFN input x.
  virtual Vector fuse(std::span<const double> ffn_out, std::span<const double> x) = 0;
};

struct ForwardOptions {
  bool mask_graph = false;  // no query may attend to graph positions
  double graph_scale = 1.0;
  double text_scale = 1.0;
  int entropy_top_n = 0;  // 0: full vocabulary
  bool entropy_renormalize = true;
  bool keep_hidden = false;
};

struct LayerRecord {
  Vector logits;   // early-exit logits of the last position
  double entropy = 0.0;  // entropy that drove this layer's hook decisions
  bool look_applied = false;
  bool remember_fired = false;
  // Last-position attention per head over visible positions.
  std::vector<Vector> raw_attention_logits;
  std::vector<Vector> attention_logits;
  std::vector<Vector> attention_weights;
};

struct LayerActivations {
  std::vector<std::size_t> visible_positions;  // key positions seen by the last query
  std::vector<LayerRecord> layers;
  std::vector<Matrix> hidden;  // per layer, only with keep_hidden
  Vector final_logits;
};

namespace detail {

struct LayerRun {
  Matrix hidden;
  std::vector<Vector> raw_logits;
  std::vector<Vector> logits;
  std::vector<Vector> weights;
};

inline LayerRun run_layer(const Matrix& input, const LayerWeights& w, const ModelParams& params,
                          const TokenSequence& seq, bool mask_graph, bool rectify_last,
                          bool fuse_last, ForwardHooks* hooks,
                          std::span<const std::size_t> visible_last) {
  const std::size_t t = input.rows();
  const std::size_t d = input.cols();
  const std::size_t heads = static_cast<std::size_t>(params.dims.head_count);
  const std::size_t hd = static_cast<std::size_t>(params.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const auto& seg = seq.segments();

  Matrix q(t, d), k(t, d), v(t, d);
  for (std::size_t i = 0; i < t; ++i) {
    const Vector a = rms_norm(input.row(i), w.attn_norm);
    const Vector qi = row_times(a, w.query);
    const Vector ki = row_times(a, w.key);
    const Vector vi = row_times(a, w.value);
    std::copy(qi.begin(), qi.end(), q.row(i).begin());
    std::copy(ki.begin(), ki.end(), k.row(i).begin());
    std::copy(vi.begin(), vi.end(), v.row(i).begin());
  }

  // Entries of visible_last that are graph positions.
  std::vector<std::size_t> graph_entries;
  for (std::size_t e = 0; e < visible_last.size(); ++e) {
    if (seg[visible_last[e]] == Segment::graph) graph_entries.push_back(e);
  }

  LayerRun run;
  run.raw_logits.resize(heads);
  run.logits.resize(heads);
  run.weights.resize(heads);
  Matrix attended(t, d);
  std::vector<std::size_t> keys;
  for (std::size_t i = 0; i < t; ++i) {
    const bool last = i + 1 == t;
    keys.clear();
    for (std::size_t j = 0; j <= i; ++j) {
      if (mask_graph && seg[j] == Segment::graph) continue;
      keys.push_back(j);
    }
    if (keys.empty()) continue;  // nothing visible: zero attention output
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * hd;
      Vector scores(keys.size());
      for (std::size_t e = 0; e < keys.size(); ++e) {
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) s += q(i, off + c) * k(keys[e], off + c);
        scores[e] = s * scale;
      }
      if (last) run.raw_logits[h] = scores;
      if (last && rectify_last) hooks->rectify(scores, graph_entries);
      const Vector probs = softmax(scores);
      for (std::size_t e = 0; e < keys.size(); ++e) {
        const double p = probs[e];
        for (std::size_t c = 0; c < hd; ++c) attended(i, off + c) += p * v(keys[e], off + c);
      }
      if (last) {
        run.logits[h] = std::move(scores);
        run.weights[h] = probs;
      }
    }
  }

  run.hidden = input;
  for (std::size_t i = 0; i < t; ++i) {
    const Vector o = row_times(attended.row(i), w.output);
    add_inplace(run.hidden.row(i), o);
    const Vector x = rms_norm(run.hidden.row(i), w.ffn_norm);
    const Vector inner = activation(row_times(x, w.ffn_in), params.dims.activation);
    Vector f = row_times(inner, w.ffn_out);
    if (fuse_last && i + 1 == t) f = hooks->fuse(f, x);
    add_inplace(run.hidden.row(i), f);
  }
  return run;
}

inline Vector exit_logits(std::span<const double> h, const ModelParams& params) {
  return row_times(rms_norm(h, params.final_norm), params.output_head);
}

}  // namespace detail

/// Full causal pass over the sequence. graph_tokens supplies the embeddings
/// of the graph slots (one row per graph position). hooks may be null.
inline LayerActivations forward_step(const TokenSequence& seq, const Matrix& graph_tokens,
                                     const ModelParams& params, ForwardHooks* hooks,
                                     const ForwardOptions& opts = {}) {
  if (seq.empty()) throw DimensionError("forward_step: empty sequence");
  const auto t = seq.size();
  const auto d = static_cast<std::size_t>(params.dims.model_dim);
  const auto vocab = static_cast<std::size_t>(params.dims.vocab_size);
  if (t > static_cast<std::size_t>(params.dims.max_positions)) {
    throw IndexError("forward_step: sequence length " + std::to_string(t) + " exceeds max_positions");
  }
  if (graph_tokens.rows() != seq.graph_count() || (graph_tokens.rows() > 0 && graph_tokens.cols() != d)) {
    throw ShapeError("forward_step: graph token matrix does not match the graph slots");
  }
  const std::size_t top_n = opts.entropy_top_n == 0 ? vocab : static_cast<std::size_t>(opts.entropy_top_n);

  Matrix h(t, d);
  for (std::size_t i = 0; i < t; ++i) {
    const int id = seq.token_ids()[i];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw IndexError("forward_step: token id " + std::to_string(id) + " outside vocabulary");
    }
    const Segment s = seq.segments()[i];
    const auto src = s == Segment::graph ? graph_tokens.row(i) : params.token_embedding.row(static_cast<std::size_t>(id));
    const double mult = s == Segment::graph ? opts.graph_scale : s == Segment::text ? opts.text_scale : 1.0;
    const auto pos = params.position_embedding.row(i);
    for (std::size_t c = 0; c < d; ++c) h(i, c) = mult * src[c] + pos[c];
  }

  LayerActivations act;
  for (std::size_t j = 0; j < t; ++j) {
    if (opts.mask_graph && seq.segments()[j] == Segment::graph) continue;
    act.visible_positions.push_back(j);
  }

  for (int l = 0; l < params.dims.layer_count; ++l) {
    const auto& w = params.layers[static_cast<std::size_t>(l)];
    bool look = hooks != nullptr && hooks->look_before(l);
    bool remember = false;
    auto run = detail::run_layer(h, w, params, seq, opts.mask_graph, look, false, hooks, act.visible_positions);
    LayerRecord rec;
    rec.logits = detail::exit_logits(run.hidden.row(t - 1), params);
    rec.entropy = normalized_entropy(softmax(rec.logits), top_n, opts.entropy_renormalize);
    if (hooks != nullptr) {
      const auto rev = hooks->after_layer(l, rec.entropy, look);
      if ((rev.look && !look) || rev.remember) {
        look = look || rev.look;
        remember = rev.remember;
        run = detail::run_layer(h, w, params, seq, opts.mask_graph, look, remember, hooks, act.visible_positions);
        rec.logits = detail::exit_logits(run.hidden.row(t - 1), params);
      }
    }
    rec.look_applied = look;
    rec.remember_fired = remember;
    rec.raw_attention_logits = std::move(run.raw_logits);
    rec.attention_logits = std::move(run.logits);
    rec.attention_weights = std::move(run.weights);
    h = std::move(run.hidden);
    if (opts.keep_hidden) act.hidden.push_back(h);
    act.layers.push_back(std::move(rec));
  }
  act.final_logits = act.layers.back().logits;
  if (!all_finite(act.final_logits)) throw NumericError("forward_step: non-finite logits");
  return act;
}

}  // namespace lorec

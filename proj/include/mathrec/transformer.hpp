#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mathrec/error.hpp"
#include "mathrec/posforest.hpp"
#include "mathrec/tensor.hpp"

namespace mathrec::model {

// Transformer viewer: embedding + fixed sinusoidal positions, pre-norm
// decoder layers (masked self-attention, cross-attention over the feature
// map with coverage-style refinement, FFN), and three linear heads sharing
// the final hidden state: symbol, nesting depth, relative position.
//
// Head id layout: symbol head columns are the vocabulary classes 0..K-1
// followed by the end marker at index K (decoding must be able to stop).
// Embedding rows cover classes plus the start marker (vocab id K).

struct TransformerConfig {
  int model_dim = 64;
  int heads = 4;
  int ffn_dim = 128;
  int layers = 3;
  int dmax = forest::kMaxDepth;
  bool refine = true;  // coverage refinement in cross-attention
};

inline void validate(const TransformerConfig& cfg) {
  if (cfg.model_dim < 1 || cfg.heads < 1 || cfg.ffn_dim < 1 || cfg.layers < 1)
    fail("InvalidArgument", "transformer dims must be positive");
  if (cfg.model_dim % cfg.heads != 0)
    fail("InvalidArgument", "model_dim must be divisible by heads");
  if (cfg.dmax < 1) fail("InvalidArgument", "dmax must be >= 1");
}

/// PE[pos, 2i] = sin(pos / 10000^(2i/dim)), PE[pos, 2i+1] = cos(same).
template <typename T>
tensor::TensorT<T> positional_encoding_1d(int length, int dim) {
  if (length < 1) fail("InvalidArgument", "positional encoding length must be >= 1");
  if (dim < 2 || dim % 2 != 0)
    fail("BadDim", "1-D positional encoding needs even dim, got " + std::to_string(dim));
  auto pe = tensor::TensorT<T>::zeros({length, dim});
  auto& v = pe.values();
  for (int pos = 0; pos < length; ++pos)
    for (int i = 0; i < dim / 2; ++i) {
      const double rate = std::pow(10000.0, 2.0 * i / dim);
      v[static_cast<size_t>(pos) * dim + 2 * i] = static_cast<T>(std::sin(pos / rate));
      v[static_cast<size_t>(pos) * dim + 2 * i + 1] = static_cast<T>(std::cos(pos / rate));
    }
  return pe;
}

/// Row-major (h*w, dim): first dim/2 encodes the row index, last dim/2 the
/// column index.
template <typename T>
tensor::TensorT<T> positional_encoding_2d(int h, int w, int dim) {
  if (h < 1 || w < 1) fail("InvalidArgument", "positional encoding grid must be non-empty");
  if (dim < 4 || dim % 4 != 0)
    fail("BadDim", "2-D positional encoding needs dim divisible by 4, got " + std::to_string(dim));
  auto rows = positional_encoding_1d<T>(h, dim / 2);
  auto cols = positional_encoding_1d<T>(w, dim / 2);
  auto pe = tensor::TensorT<T>::zeros({h * w, dim});
  auto& v = pe.values();
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      T* out = v.data() + (static_cast<size_t>(r) * w + c) * dim;
      const T* rv = rows.values().data() + static_cast<size_t>(r) * (dim / 2);
      const T* cv = cols.values().data() + static_cast<size_t>(c) * (dim / 2);
      std::copy_n(rv, dim / 2, out);
      std::copy_n(cv, dim / 2, out + dim / 2);
    }
  return pe;
}

template <typename T>
struct DecoderOutput {
  tensor::TensorT<T> symbol_logits;  // (T, K+1)
  tensor::TensorT<T> depth_logits;   // (T, dmax+1)
  tensor::TensorT<T> relpos_logits;  // (T, 3)
  // cross_attention[layer][head]: (T, L) rows summing to 1
  std::vector<std::vector<tensor::TensorT<T>>> cross_attention;
};

struct DecodeResult {
  std::vector<int> ids;  // class ids, end marker stripped
  bool truncated = false;
};

template <typename T>
struct LayerNormAffine {
  tensor::TensorT<T> gamma, beta;

  void init(int dim) {
    gamma = tensor::TensorT<T>::full({dim}, T(1));
    beta = tensor::TensorT<T>::zeros({dim});
  }
  tensor::TensorT<T> forward(const tensor::TensorT<T>& x) const {
    return tensor::add_axis(tensor::mul_axis(tensor::layer_norm(x, 1), gamma, 1), beta, 1);
  }
  void register_params(std::vector<std::pair<std::string, tensor::TensorT<T>>>& out,
                       const std::string& prefix) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
  }
};

template <typename T>
struct LinearT {
  tensor::TensorT<T> w, b;

  void init(int din, int dout, std::mt19937_64& rng, bool bias = true) {
    w = tensor::TensorT<T>::xavier({din, dout}, din, dout, rng);
    if (bias) b = tensor::TensorT<T>::zeros({dout});
  }
  tensor::TensorT<T> forward(const tensor::TensorT<T>& x) const {
    auto y = tensor::matmul(x, w);
    return b.defined() ? tensor::add_axis(y, b, 1) : y;
  }
  void register_params(std::vector<std::pair<std::string, tensor::TensorT<T>>>& out,
                       const std::string& prefix) const {
    out.emplace_back(prefix + ".w", w);
    if (b.defined()) out.emplace_back(prefix + ".b", b);
  }
};

template <typename T>
struct DecoderLayerT {
  LayerNormAffine<T> ln_self, ln_cross, ln_ffn;
  LinearT<T> self_q, self_k, self_v, self_o;
  LinearT<T> cross_q, cross_k, cross_v, cross_o;
  tensor::TensorT<T> gains;  // per-head refinement gain, init 1
  LinearT<T> ffn1, ffn2;

  void init(const TransformerConfig& cfg, std::mt19937_64& rng) {
    const int d = cfg.model_dim;
    ln_self.init(d);
    ln_cross.init(d);
    ln_ffn.init(d);
    self_q.init(d, d, rng);
    self_k.init(d, d, rng, false);  // key bias cancels in softmax
    self_v.init(d, d, rng);
    self_o.init(d, d, rng);
    cross_q.init(d, d, rng);
    cross_k.init(d, d, rng, false);
    cross_v.init(d, d, rng);
    cross_o.init(d, d, rng);
    gains = tensor::TensorT<T>::full({cfg.heads}, T(1));
    ffn1.init(d, cfg.ffn_dim, rng);
    ffn2.init(cfg.ffn_dim, d, rng);
  }

  void register_params(std::vector<std::pair<std::string, tensor::TensorT<T>>>& out,
                       const std::string& prefix) const {
    ln_self.register_params(out, prefix + ".ln_self");
    ln_cross.register_params(out, prefix + ".ln_cross");
    ln_ffn.register_params(out, prefix + ".ln_ffn");
    self_q.register_params(out, prefix + ".self_q");
    self_k.register_params(out, prefix + ".self_k");
    self_v.register_params(out, prefix + ".self_v");
    self_o.register_params(out, prefix + ".self_o");
    cross_q.register_params(out, prefix + ".cross_q");
    cross_k.register_params(out, prefix + ".cross_k");
    cross_v.register_params(out, prefix + ".cross_v");
    cross_o.register_params(out, prefix + ".cross_o");
    out.emplace_back(prefix + ".gains", gains);
    ffn1.register_params(out, prefix + ".ffn1");
    ffn2.register_params(out, prefix + ".ffn2");
  }
};

template <typename T>
struct PositionDecoderT {
  TransformerConfig cfg;
  int num_classes = 0;
  tensor::TensorT<T> embed;  // (K+2, d): classes, sos, eos
  LinearT<T> mem_proj;       // backbone channels -> model_dim
  std::vector<DecoderLayerT<T>> layers;
  LayerNormAffine<T> ln_final;
  LinearT<T> head_symbol, head_depth, head_relpos;

  int sos_embed_id() const { return num_classes; }
  int eos_head_id() const { return num_classes; }

  void init(const TransformerConfig& config, int classes, int feature_channels,
            std::mt19937_64& rng) {
    validate(config);
    if (classes < 1) fail("InvalidArgument", "need at least one symbol class");
    cfg = config;
    num_classes = classes;
    const int d = cfg.model_dim;
    embed = tensor::TensorT<T>::xavier({classes + 2, d}, classes + 2, d, rng);
    mem_proj.init(feature_channels, d, rng);
    layers.assign(static_cast<size_t>(cfg.layers), {});
    for (auto& l : layers) l.init(cfg, rng);
    ln_final.init(d);
    head_symbol.init(d, classes + 1, rng);
    head_depth.init(d, cfg.dmax + 1, rng);
    head_relpos.init(d, 3, rng);
  }

  /// Backbone features (C', H', W') -> memory (H'*W', d) with 2-D positions.
  tensor::TensorT<T> make_memory(const tensor::TensorT<T>& features) const {
    if (features.rank() != 3)
      fail("ShapeMismatch", "memory features must be (C,H,W), got " +
                                tensor::shape_str(features.shape()));
    const int c = features.dim(0), h = features.dim(1), w = features.dim(2);
    auto m = tensor::transpose(tensor::reshape(features, {c, h * w}));
    m = mem_proj.forward(m);
    return tensor::add(m, positional_encoding_2d<T>(h, w, cfg.model_dim));
  }

  /// Teacher-forced pass. ids are embedding ids (sos first); output row t
  /// depends only on ids[0..t] and the memory.
  DecoderOutput<T> forward(const tensor::TensorT<T>& memory, const std::vector<int>& ids) const {
    if (ids.empty()) fail("EmptySequence", "decoder needs at least one input id");
    const int d = cfg.model_dim, H = cfg.heads, dk = d / H;
    const int steps = static_cast<int>(ids.size());
    const T inv_sqrt_dk = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dk)));

    auto x = tensor::mul_scalar(tensor::embedding(embed, ids),
                                static_cast<T>(std::sqrt(static_cast<double>(d))));
    x = tensor::add(x, positional_encoding_1d<T>(steps, d));

    DecoderOutput<T> out;
    for (const auto& layer : layers) {
      // masked self-attention
      {
        auto sx = layer.ln_self.forward(x);
        auto q = layer.self_q.forward(sx);
        auto k = layer.self_k.forward(sx);
        auto v = layer.self_v.forward(sx);
        tensor::TensorT<T> ctx;
        for (int hh = 0; hh < H; ++hh) {
          auto qh = tensor::narrow(q, 1, hh * dk, dk);
          auto kh = tensor::narrow(k, 1, hh * dk, dk);
          auto vh = tensor::narrow(v, 1, hh * dk, dk);
          auto scores =
              tensor::mul_scalar(tensor::matmul(qh, tensor::transpose(kh)), inv_sqrt_dk);
          auto attn = tensor::softmax(tensor::causal_mask(scores), 1);
          auto ctx_h = tensor::matmul(attn, vh);
          ctx = hh == 0 ? ctx_h : tensor::concat(ctx, ctx_h, 1);
        }
        x = tensor::add(x, layer.self_o.forward(ctx));
      }
      // cross-attention with coverage refinement
      {
        auto cx = layer.ln_cross.forward(x);
        auto q = layer.cross_q.forward(cx);
        auto k = layer.cross_k.forward(memory);
        auto v = layer.cross_v.forward(memory);
        tensor::TensorT<T> ctx;
        std::vector<tensor::TensorT<T>> maps;
        for (int hh = 0; hh < H; ++hh) {
          auto qh = tensor::narrow(q, 1, hh * dk, dk);
          auto kh = tensor::narrow(k, 1, hh * dk, dk);
          auto vh = tensor::narrow(v, 1, hh * dk, dk);
          auto scores =
              tensor::mul_scalar(tensor::matmul(qh, tensor::transpose(kh)), inv_sqrt_dk);
          auto attn = cfg.refine
                          ? tensor::coverage_softmax(scores, tensor::narrow(layer.gains, 0, hh, 1))
                          : tensor::softmax(scores, 1);
          maps.push_back(attn);
          auto ctx_h = tensor::matmul(attn, vh);
          ctx = hh == 0 ? ctx_h : tensor::concat(ctx, ctx_h, 1);
        }
        out.cross_attention.push_back(std::move(maps));
        x = tensor::add(x, layer.cross_o.forward(ctx));
      }
      // feed-forward
      {
        auto fx = layer.ln_ffn.forward(x);
        x = tensor::add(x, layer.ffn2.forward(tensor::relu(layer.ffn1.forward(fx))));
      }
    }
    auto h = ln_final.forward(x);
    out.symbol_logits = head_symbol.forward(h);
    out.depth_logits = head_depth.forward(h);
    out.relpos_logits = head_relpos.forward(h);
    return out;
  }

  /// Argmax decoding; ties break to the lowest class index. Stops at the end
  /// marker or after max_len emitted tokens (then truncated is set).
  DecodeResult greedy_decode(const tensor::TensorT<T>& memory, int max_len) const {
    if (max_len < 1) fail("InvalidArgument", "max_len must be >= 1");
    DecodeResult res;
    std::vector<int> ids = {sos_embed_id()};
    for (int t = 0; t < max_len; ++t) {
      auto out = forward(memory, ids);
      const int cols = out.symbol_logits.dim(1);
      const T* row =
          out.symbol_logits.values().data() + static_cast<size_t>(ids.size() - 1) * cols;
      int best = 0;
      for (int j = 1; j < cols; ++j)
        if (row[j] > row[best]) best = j;
      if (best == eos_head_id()) return res;
      res.ids.push_back(best);
      ids.push_back(best);
    }
    res.truncated = true;
    return res;
  }

  void register_params(std::vector<std::pair<std::string, tensor::TensorT<T>>>& out,
                       const std::string& prefix) const {
    out.emplace_back(prefix + ".embed", embed);
    mem_proj.register_params(out, prefix + ".mem_proj");
    for (size_t i = 0; i < layers.size(); ++i)
      layers[i].register_params(out, prefix + ".layer" + std::to_string(i));
    ln_final.register_params(out, prefix + ".ln_final");
    head_symbol.register_params(out, prefix + ".head_symbol");
    head_depth.register_params(out, prefix + ".head_depth");
    head_relpos.register_params(out, prefix + ".head_relpos");
  }
};

namespace detail {
template <typename T>
void check_targets(const tensor::TensorT<T>& logits, const std::vector<int>& targets,
                   const char* what) {
  if (static_cast<size_t>(logits.dim(0)) != targets.size())
    fail("ShapeMismatch", std::string(what) + ": " + std::to_string(targets.size()) +
                              " targets vs logits " + tensor::shape_str(logits.shape()));
  for (int t : targets)
    if (t < 0 || t >= logits.dim(1))
      fail("TargetOutOfRange", std::string(what) + " target " + std::to_string(t) +
                                   " outside [0, " + std::to_string(logits.dim(1)) + ")");
}
}  // namespace detail

/// -(1/T) sum_t log p(y_c^t).
template <typename T>
tensor::TensorT<T> loss_rec(const tensor::TensorT<T>& symbol_logits,
                            const std::vector<int>& targets) {
  detail::check_targets(symbol_logits, targets, "symbol");
  return tensor::nll_from_logprobs(tensor::log_softmax(symbol_logits, 1), targets);
}

/// -(1/T) sum_t [log p(y_n^t) + log p(y_r^t)].
template <typename T>
tensor::TensorT<T> loss_pos(const tensor::TensorT<T>& depth_logits,
                            const tensor::TensorT<T>& relpos_logits,
                            const std::vector<int>& depth_targets,
                            const std::vector<int>& relpos_targets) {
  detail::check_targets(depth_logits, depth_targets, "depth");
  detail::check_targets(relpos_logits, relpos_targets, "relpos");
  return tensor::add(
      tensor::nll_from_logprobs(tensor::log_softmax(depth_logits, 1), depth_targets),
      tensor::nll_from_logprobs(tensor::log_softmax(relpos_logits, 1), relpos_targets));
}

}  // namespace mathrec::model

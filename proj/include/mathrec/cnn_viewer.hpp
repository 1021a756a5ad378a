#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mathrec/error.hpp"
#include "mathrec/tensor.hpp"
#include "mathrec/transformer.hpp"

namespace mathrec::model {

// CNN viewer. The multi-scale counting module runs two parallel conv
// branches (3x3 and 5x5, same padding), gates each with squeeze-style
// channel attention, projects to one channel per symbol class, applies a
// sigmoid, and sum-pools over space; the class counts are the mean of the
// two branches. A plain single 1x1 head (no branches, no gate) covers the
// counting-only ablation. CCAD is the optional GRU coverage-attention
// recognizer trained with its own sequence loss.

template <typename T>
struct ChannelAttention {
  LinearT<T> squeeze, excite;
  bool enabled = true;

  void init(int channels, int ratio, std::mt19937_64& rng) {
    const int mid = std::max(1, channels / ratio);
    squeeze.init(channels, mid, rng);
    excite.init(mid, channels, rng);
  }

  /// gate = sigmoid(W2 relu(W1 gap(x))); output = x scaled per channel.
  tensor::TensorT<T> forward(const tensor::TensorT<T>& x) const {
    if (!enabled) return x;
    auto z = tensor::reshape(tensor::global_avg_pool(x), {1, x.dim(0)});
    auto gate = tensor::sigmoid(excite.forward(tensor::relu(squeeze.forward(z))));
    return tensor::mul_axis(x, tensor::reshape(gate, {x.dim(0)}), 0);
  }

  void register_params(std::vector<std::pair<std::string, tensor::TensorT<T>>>& out,
                       const std::string& prefix) const {
    squeeze.register_params(out, prefix + ".squeeze");
    excite.register_params(out, prefix + ".excite");
  }
};

template <typename T>
struct MscmOutputT {
  tensor::TensorT<T> count_pred;     // (K), non-negative
  tensor::TensorT<T> count_feature;  // (1, feature_dim)
};

template <typename T>
struct MscmBranch {
  tensor::TensorT<T> conv_w, conv_b;  // k x k, channels preserved
  ChannelAttention<T> attn;
  tensor::TensorT<T> proj_w, proj_b;  // 1x1 to |classes|
  int kernel = 3;

  void init(int channels, int classes, int k, int attn_ratio, std::mt19937_64& rng) {
    kernel = k;
    conv_w = tensor::TensorT<T>::xavier({channels, channels, k, k}, channels * k * k,
                                        channels * k * k, rng);
    conv_b = tensor::TensorT<T>::zeros({channels});
    attn.init(channels, attn_ratio, rng);
    proj_w = tensor::TensorT<T>::xavier({classes, channels, 1, 1}, channels, classes, rng);
    proj_b = tensor::TensorT<T>::zeros({classes});
  }

  tensor::TensorT<T> forward(const tensor::TensorT<T>& features) const {
    auto h = tensor::add_axis(tensor::conv2d(features, conv_w, 1, kernel / 2), conv_b, 0);
    h = attn.forward(h);
    h = tensor::add_axis(tensor::conv2d(h, proj_w, 1, 0), proj_b, 0);
    return tensor::sum_pool2d(tensor::sigmoid(h));
  }

  void register_params(std::vector<std::pair<std::string, tensor::TensorT<T>>>& out,
                       const std::string& prefix) const {
    out.emplace_back(prefix + ".conv.w", conv_w);
    out.emplace_back(prefix + ".conv.b", conv_b);
    attn.register_params(out, prefix + ".attn");
    out.emplace_back(prefix + ".proj.w", proj_w);
    out.emplace_back(prefix + ".proj.b", proj_b);
  }
};

template <typename T>
struct MscmT {
  bool multi_view = true;  // false: plain single 1x1 counting head
  MscmBranch<T> branch3, branch5;
  tensor::TensorT<T> plain_w, plain_b;
  LinearT<T> to_feature;

  void init(int channels, int classes, int feature_dim, int attn_ratio, bool multi_view_on,
            std::mt19937_64& rng) {
    multi_view = multi_view_on;
    if (multi_view) {
      branch3.init(channels, classes, 3, attn_ratio, rng);
      branch5.init(channels, classes, 5, attn_ratio, rng);
    } else {
      plain_w = tensor::TensorT<T>::xavier({classes, channels, 1, 1}, channels, classes, rng);
      plain_b = tensor::TensorT<T>::zeros({classes});
    }
    to_feature.init(classes, feature_dim, rng);
  }

  void set_channel_attention(bool on) {
    branch3.attn.enabled = on;
    branch5.attn.enabled = on;
  }

  MscmOutputT<T> forward(const tensor::TensorT<T>& features) const {
    MscmOutputT<T> out;
    if (multi_view) {
      out.count_pred = tensor::mul_scalar(
          tensor::add(branch3.forward(features), branch5.forward(features)), T(0.5));
    } else {
      auto h = tensor::add_axis(tensor::conv2d(features, plain_w, 1, 0), plain_b, 0);
      out.count_pred = tensor::sum_pool2d(tensor::sigmoid(h));
    }
    out.count_feature =
        to_feature.forward(tensor::reshape(out.count_pred, {1, out.count_pred.dim(0)}));
    return out;
  }

  void register_params(std::vector<std::pair<std::string, tensor::TensorT<T>>>& out,
                       const std::string& prefix) const {
    if (multi_view) {
      branch3.register_params(out, prefix + ".branch3");
      branch5.register_params(out, prefix + ".branch5");
    } else {
      out.emplace_back(prefix + ".plain.w", plain_w);
      out.emplace_back(prefix + ".plain.b", plain_b);
    }
    to_feature.register_params(out, prefix + ".to_feature");
  }
};

/// Smooth-L1 counting loss between predicted and target counts (Eq-6 style:
/// beta = 1, mean over classes).
template <typename T>
tensor::TensorT<T> loss_counting(const tensor::TensorT<T>& count_pred,
                                 const std::vector<double>& target) {
  if (static_cast<size_t>(count_pred.dim(0)) != target.size())
    fail("ShapeMismatch", "counting target length " + std::to_string(target.size()) +
                              " vs pred " + tensor::shape_str(count_pred.shape()));
  std::vector<T> tv(target.begin(), target.end());
  auto tgt = tensor::TensorT<T>::from({static_cast<int>(target.size())}, std::move(tv));
  return tensor::huber_mean(tensor::sub(count_pred, tgt));
}

// ---------------------------------------------------------------------------
// CCAD: GRU decoder with coverage attention (Task2 ablation, off by default)
// ---------------------------------------------------------------------------

struct CcadConfig {
  int embed_dim = 32;
  int hidden_dim = 64;
  int attn_dim = 64;
  int coverage_channels = 16;
  int coverage_kernel = 5;
};

template <typename T>
struct CoverageStateT {
  tensor::TensorT<T> hidden;    // (1, Dh)
  tensor::TensorT<T> coverage;  // (1, H', W'), sum of past attention maps
};

template <typename T>
struct CcadStepOut {
  tensor::TensorT<T> logits;     // (1, K+1)
  tensor::TensorT<T> attention;  // (L)
  CoverageStateT<T> state;
};

template <typename T>
struct CcadT {
  CcadConfig cfg;
  int num_classes = 0;
  tensor::TensorT<T> embed;    // (K+2, embed_dim)
  tensor::TensorT<T> h0;       // (1, Dh) learned initial hidden
  LinearT<T> attn_f, attn_h;   // features / hidden -> attn_dim
  tensor::TensorT<T> cov_w;    // coverage conv (q, 1, k, k)
  LinearT<T> attn_c;           // coverage channels -> attn_dim
  tensor::TensorT<T> attn_v;   // (attn_dim, 1)
  tensor::GruParams<T> gru;
  LinearT<T> head;             // hidden -> K+1

  int sos_embed_id() const { return num_classes; }
  int eos_head_id() const { return num_classes; }

  void init(const CcadConfig& config, int classes, int feature_channels, int count_feature_dim,
            std::mt19937_64& rng) {
    cfg = config;
    num_classes = classes;
    embed = tensor::TensorT<T>::xavier({classes + 2, cfg.embed_dim}, classes + 2, cfg.embed_dim,
                                       rng);
    h0 = tensor::TensorT<T>::zeros({1, cfg.hidden_dim});
    attn_f.init(feature_channels, cfg.attn_dim, rng);
    attn_h.init(cfg.hidden_dim, cfg.attn_dim, rng);
    const int k = cfg.coverage_kernel;
    cov_w = tensor::TensorT<T>::xavier({cfg.coverage_channels, 1, k, k}, k * k,
                                       cfg.coverage_channels * k * k, rng);
    attn_c.init(cfg.coverage_channels, cfg.attn_dim, rng);
    attn_v = tensor::TensorT<T>::xavier({cfg.attn_dim, 1}, cfg.attn_dim, 1, rng);
    const int din = cfg.embed_dim + feature_channels + count_feature_dim;
    auto make = [&](int a, int b2) { return tensor::TensorT<T>::xavier({a, b2}, a, b2, rng); };
    gru.w_z = make(din, cfg.hidden_dim);
    gru.u_z = make(cfg.hidden_dim, cfg.hidden_dim);
    gru.b_z = tensor::TensorT<T>::zeros({cfg.hidden_dim});
    gru.w_r = make(din, cfg.hidden_dim);
    gru.u_r = make(cfg.hidden_dim, cfg.hidden_dim);
    gru.b_r = tensor::TensorT<T>::zeros({cfg.hidden_dim});
    gru.w_h = make(din, cfg.hidden_dim);
    gru.u_h = make(cfg.hidden_dim, cfg.hidden_dim);
    gru.b_h = tensor::TensorT<T>::zeros({cfg.hidden_dim});
    head.init(cfg.hidden_dim, classes + 1, rng);
  }

  CoverageStateT<T> initial_state(int fh, int fw) const {
    return {h0, tensor::TensorT<T>::zeros({1, fh, fw})};
  }

  /// One decode step. features_flat: (L, C') where L = fh*fw.
  CcadStepOut<T> step(const CoverageStateT<T>& state, const tensor::TensorT<T>& features_flat,
                      const tensor::TensorT<T>& count_feature, int prev_id) const {
    const int fh = state.coverage.dim(1), fw = state.coverage.dim(2);
    const int L = fh * fw;
    if (features_flat.dim(0) != L)
      fail("ShapeMismatch", "features " + tensor::shape_str(features_flat.shape()) +
                                " vs coverage " + tensor::shape_str(state.coverage.shape()));
    // energy = v . tanh(W_f f + W_h h + W_c conv(coverage))
    auto q = tensor::conv2d(state.coverage, cov_w, 1, cfg.coverage_kernel / 2);
    auto qf = tensor::transpose(tensor::reshape(q, {cfg.coverage_channels, L}));
    auto e = tensor::add(attn_f.forward(features_flat), attn_c.forward(qf));
    e = tensor::add_axis(e, tensor::reshape(attn_h.forward(state.hidden), {cfg.attn_dim}), 1);
    auto energy = tensor::transpose(tensor::matmul(tensor::tanh(e), attn_v));  // (1, L)
    auto alpha = tensor::softmax(energy, 1);
    auto context = tensor::matmul(alpha, features_flat);  // (1, C')
    auto emb = tensor::embedding(embed, {prev_id});
    auto gin = tensor::concat(tensor::concat(emb, context, 1), count_feature, 1);
    CcadStepOut<T> out;
    out.state.hidden = tensor::gru_cell(gin, state.hidden, gru);
    out.state.coverage = tensor::add(state.coverage, tensor::reshape(alpha, {1, fh, fw}));
    out.logits = head.forward(out.state.hidden);
    out.attention = tensor::reshape(alpha, {L});
    return out;
  }

  /// Teacher-forced sequence loss: -(1/T) sum log p(y_t), eos included.
  tensor::TensorT<T> sequence_loss(const tensor::TensorT<T>& features,
                                   const tensor::TensorT<T>& count_feature,
                                   const std::vector<int>& class_ids) const {
    const int c = features.dim(0), fh = features.dim(1), fw = features.dim(2);
    auto flat = tensor::transpose(tensor::reshape(features, {c, fh * fw}));
    auto state = initial_state(fh, fw);
    std::vector<int> targets = class_ids;
    targets.push_back(eos_head_id());
    tensor::TensorT<T> logits;
    int prev = sos_embed_id();
    for (size_t t = 0; t < targets.size(); ++t) {
      auto step_out = step(state, flat, count_feature, prev);
      state = step_out.state;
      logits = t == 0 ? step_out.logits : tensor::concat(logits, step_out.logits, 0);
      prev = targets[t] == eos_head_id() ? sos_embed_id() : targets[t];
    }
    return loss_rec(logits, targets);
  }

  void register_params(std::vector<std::pair<std::string, tensor::TensorT<T>>>& out,
                       const std::string& prefix) const {
    out.emplace_back(prefix + ".embed", embed);
    out.emplace_back(prefix + ".h0", h0);
    attn_f.register_params(out, prefix + ".attn_f");
    attn_h.register_params(out, prefix + ".attn_h");
    out.emplace_back(prefix + ".cov.w", cov_w);
    attn_c.register_params(out, prefix + ".attn_c");
    out.emplace_back(prefix + ".attn_v", attn_v);
    out.emplace_back(prefix + ".gru.w_z", gru.w_z);
    out.emplace_back(prefix + ".gru.u_z", gru.u_z);
    out.emplace_back(prefix + ".gru.b_z", gru.b_z);
    out.emplace_back(prefix + ".gru.w_r", gru.w_r);
    out.emplace_back(prefix + ".gru.u_r", gru.u_r);
    out.emplace_back(prefix + ".gru.b_r", gru.b_r);
    out.emplace_back(prefix + ".gru.w_h", gru.w_h);
    out.emplace_back(prefix + ".gru.u_h", gru.u_h);
    out.emplace_back(prefix + ".gru.b_h", gru.b_h);
    head.register_params(out, prefix + ".head");
  }
};

}  // namespace mathrec::model

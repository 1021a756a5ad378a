#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mathrec/error.hpp"
#include "mathrec/image.hpp"
#include "mathrec/tensor.hpp"

namespace mathrec::model {

// DenseNet-style encoder. Stem: 7x7 stride-2 convolution. Each dense layer
// is LN(channels) + affine -> relu -> 3x3 conv, output concatenated to the
// running stack. Transitions compress channels with a 1x1 conv and halve the
// spatial dims with ceil-mode 2x2 average pooling. Total stride 8 with two
// transitions. Layer normalization (not batch statistics) keeps the forward
// pass batch-size independent and deterministic.

struct BackboneConfig {
  int growth_rate = 8;
  std::vector<int> block_layers = {2, 2, 2};
  int initial_channels = 16;
  double reduction = 0.5;
};

constexpr int kBackboneStride = 8;

inline void validate(const BackboneConfig& cfg) {
  if (cfg.growth_rate < 1) fail("InvalidArgument", "growth_rate must be >= 1");
  if (cfg.block_layers.empty()) fail("InvalidArgument", "need at least one dense block");
  for (int n : cfg.block_layers)
    if (n < 1) fail("InvalidArgument", "every dense block needs >= 1 layer");
  if (cfg.initial_channels < 1) fail("InvalidArgument", "initial_channels must be >= 1");
  if (cfg.reduction <= 0.0 || cfg.reduction > 1.0)
    fail("InvalidArgument", "reduction must be in (0, 1]");
}

/// Closed-form output channel count: init -> +layers*growth per block,
/// x reduction after every block but the last.
inline int backbone_out_channels(const BackboneConfig& cfg) {
  validate(cfg);
  int c = cfg.initial_channels;
  for (size_t b = 0; b < cfg.block_layers.size(); ++b) {
    c += cfg.block_layers[b] * cfg.growth_rate;
    if (b + 1 < cfg.block_layers.size()) c = static_cast<int>(c * cfg.reduction);
  }
  return c;
}

template <typename T>
struct NormReluConv {
  tensor::TensorT<T> gamma, beta;  // LN affine over channels
  tensor::TensorT<T> w, b;

  void init(int in_ch, int out_ch, int k, std::mt19937_64& rng) {
    gamma = tensor::TensorT<T>::full({in_ch}, T(1));
    beta = tensor::TensorT<T>::zeros({in_ch});
    w = tensor::TensorT<T>::xavier({out_ch, in_ch, k, k}, in_ch * k * k, out_ch * k * k, rng);
    b = tensor::TensorT<T>::zeros({out_ch});
  }

  tensor::TensorT<T> forward(const tensor::TensorT<T>& x, int stride, int padding) const {
    auto h = tensor::layer_norm(x, 0);
    h = tensor::mul_axis(h, gamma, 0);
    h = tensor::add_axis(h, beta, 0);
    h = tensor::relu(h);
    h = tensor::conv2d(h, w, stride, padding);
    return tensor::add_axis(h, b, 0);
  }

  void register_params(std::vector<std::pair<std::string, tensor::TensorT<T>>>& out,
                       const std::string& prefix) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
  }
};

template <typename T>
struct BackboneT {
  BackboneConfig cfg;
  tensor::TensorT<T> stem_w, stem_b;
  std::vector<std::vector<NormReluConv<T>>> blocks;
  std::vector<NormReluConv<T>> transitions;

  void init(const BackboneConfig& config, std::mt19937_64& rng) {
    validate(config);
    cfg = config;
    stem_w = tensor::TensorT<T>::xavier({cfg.initial_channels, 1, 7, 7}, 49,
                                        cfg.initial_channels * 49, rng);
    stem_b = tensor::TensorT<T>::zeros({cfg.initial_channels});
    blocks.clear();
    transitions.clear();
    int c = cfg.initial_channels;
    for (size_t bi = 0; bi < cfg.block_layers.size(); ++bi) {
      std::vector<NormReluConv<T>> block;
      for (int li = 0; li < cfg.block_layers[bi]; ++li) {
        NormReluConv<T> layer;
        layer.init(c, cfg.growth_rate, 3, rng);
        block.push_back(std::move(layer));
        c += cfg.growth_rate;
      }
      blocks.push_back(std::move(block));
      if (bi + 1 < cfg.block_layers.size()) {
        const int cc = static_cast<int>(c * cfg.reduction);
        NormReluConv<T> tr;
        tr.init(c, cc, 1, rng);
        transitions.push_back(std::move(tr));
        c = cc;
      }
    }
  }

  int out_channels() const { return backbone_out_channels(cfg); }

  /// x: (1, H, W) with values in [0, 1] -> (C', ceil(H/8), ceil(W/8)).
  tensor::TensorT<T> forward(const tensor::TensorT<T>& x) const {
    if (x.rank() != 3 || x.dim(0) != 1)
      fail("ShapeMismatch", "backbone input must be (1,H,W), got " + tensor::shape_str(x.shape()));
    if (x.dim(1) < kBackboneStride || x.dim(2) < kBackboneStride)
      fail("InputTooSmall", "input " + std::to_string(x.dim(1)) + "x" + std::to_string(x.dim(2)) +
                                " below total stride " + std::to_string(kBackboneStride));
    auto h = tensor::add_axis(tensor::conv2d(x, stem_w, 2, 3), stem_b, 0);
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
      for (const auto& layer : blocks[bi]) h = tensor::concat(h, layer.forward(h, 1, 1), 0);
      if (bi < transitions.size()) {
        h = transitions[bi].forward(h, 1, 0);
        h = tensor::avg_pool2d(h, 2, 2, true);
      }
    }
    return h;
  }

  void register_params(std::vector<std::pair<std::string, tensor::TensorT<T>>>& out,
                       const std::string& prefix) const {
    out.emplace_back(prefix + ".stem.w", stem_w);
    out.emplace_back(prefix + ".stem.b", stem_b);
    for (size_t bi = 0; bi < blocks.size(); ++bi)
      for (size_t li = 0; li < blocks[bi].size(); ++li)
        blocks[bi][li].register_params(
            out, prefix + ".block" + std::to_string(bi) + ".layer" + std::to_string(li));
    for (size_t ti = 0; ti < transitions.size(); ++ti)
      transitions[ti].register_params(out, prefix + ".trans" + std::to_string(ti));
  }
};

/// Image -> (1, H, W) input tensor.
template <typename T>
tensor::TensorT<T> image_tensor(const data::Image& img) {
  std::vector<T> vals(img.pixels.size());
  for (size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<T>(img.pixels[i]);
  return tensor::TensorT<T>::from({1, img.height, img.width}, std::move(vals));
}

}  // namespace mathrec::model

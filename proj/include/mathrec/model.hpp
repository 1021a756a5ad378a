#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mathrec/backbone.hpp"
#include "mathrec/cnn_viewer.hpp"
#include "mathrec/error.hpp"
#include "mathrec/tensor.hpp"
#include "mathrec/transformer.hpp"

namespace mathrec::model {

// Full multi-viewer model: shared DenseNet encoder feeding the Transformer
// viewer (symbol + position heads) and the CNN counting viewer. Ablation
// flags reify the four training strategies: baseline (no counting), plain
// counting head (task1), the two-branch multi-scale module (multi_view), and
// the auxiliary GRU recognizer (task2).

struct ModelConfig {
  BackboneConfig backbone;
  TransformerConfig transformer;
  CcadConfig ccad;
  bool task1 = true;
  bool multi_view = true;
  bool task2 = false;
  bool channel_attn = true;
  int attn_ratio = 4;
  int count_feature_dim = 64;
};

inline void validate(const ModelConfig& cfg) {
  validate(cfg.backbone);
  validate(cfg.transformer);
  if (cfg.task2 && !cfg.multi_view) fail("InvalidArgument", "task2 requires multi_view");
  if (cfg.multi_view && !cfg.task1) fail("InvalidArgument", "multi_view requires task1");
  if (cfg.count_feature_dim < 1) fail("InvalidArgument", "count_feature_dim must be >= 1");
  if (cfg.attn_ratio < 1) fail("InvalidArgument", "attn_ratio must be >= 1");
}

/// Supervision targets for one sample, in class-id space (0..K-1).
struct Targets {
  std::vector<int> classes;
  std::vector<int> depths;
  std::vector<int> relpos;
  std::vector<double> counts;
};

template <typename T>
struct ModelT {
  ModelConfig cfg;
  int num_classes = 0;
  BackboneT<T> backbone;
  PositionDecoderT<T> decoder;
  MscmT<T> mscm;
  CcadT<T> ccad;

  void init(const ModelConfig& config, int classes, std::uint64_t seed) {
    validate(config);
    if (classes < 1) fail("InvalidArgument", "need at least one symbol class");
    cfg = config;
    num_classes = classes;
    std::mt19937_64 rng(seed);
    backbone.init(cfg.backbone, rng);
    const int fc = backbone.out_channels();
    decoder.init(cfg.transformer, classes, fc, rng);
    if (cfg.task1) {
      mscm.init(fc, classes, cfg.count_feature_dim, cfg.attn_ratio, cfg.multi_view, rng);
      mscm.set_channel_attention(cfg.channel_attn);
    }
    if (cfg.task2) ccad.init(cfg.ccad, classes, fc, cfg.count_feature_dim, rng);
  }

  struct Losses {
    tensor::TensorT<T> rec, pos;
    tensor::TensorT<T> cnt;       // defined iff task1
    tensor::TensorT<T> ccad_rec;  // defined iff task2
    tensor::TensorT<T> count_pred;
  };

  Losses forward_losses(const tensor::TensorT<T>& image, const Targets& tgt) const {
    if (tgt.classes.empty()) fail("EmptySequence", "sample with no target tokens");
    if (tgt.depths.size() != tgt.classes.size() || tgt.relpos.size() != tgt.classes.size())
      fail("ShapeMismatch", "target label lengths disagree with token count");
    auto feats = backbone.forward(image);
    auto memory = decoder.make_memory(feats);

    std::vector<int> in_ids = {decoder.sos_embed_id()};
    in_ids.insert(in_ids.end(), tgt.classes.begin(), tgt.classes.end());
    auto out = decoder.forward(memory, in_ids);

    // The end-marker step carries (depth 0, middle) position targets.
    std::vector<int> sym = tgt.classes;
    sym.push_back(decoder.eos_head_id());
    std::vector<int> dep = tgt.depths;
    dep.push_back(0);
    std::vector<int> rel = tgt.relpos;
    rel.push_back(0);

    Losses l;
    l.rec = loss_rec(out.symbol_logits, sym);
    l.pos = loss_pos(out.depth_logits, out.relpos_logits, dep, rel);
    if (cfg.task1) {
      auto m = mscm.forward(feats);
      l.cnt = loss_counting(m.count_pred, tgt.counts);
      l.count_pred = m.count_pred;
      if (cfg.task2) l.ccad_rec = ccad.sequence_loss(feats, m.count_feature, tgt.classes);
    }
    return l;
  }

  DecodeResult predict_ids(const tensor::TensorT<T>& image, int max_len) const {
    auto feats = backbone.forward(image);
    return decoder.greedy_decode(decoder.make_memory(feats), max_len);
  }

  /// Predicted class counts for one image (task1 configs only).
  std::vector<double> predict_counts(const tensor::TensorT<T>& image) const {
    if (!cfg.task1) fail("InvalidArgument", "counting head disabled in this config");
    auto m = mscm.forward(backbone.forward(image));
    std::vector<double> out(m.count_pred.values().begin(), m.count_pred.values().end());
    return out;
  }

  std::vector<std::pair<std::string, tensor::TensorT<T>>> named_params() const {
    std::vector<std::pair<std::string, tensor::TensorT<T>>> out;
    backbone.register_params(out, "backbone");
    decoder.register_params(out, "decoder");
    if (cfg.task1) mscm.register_params(out, "mscm");
    if (cfg.task2) ccad.register_params(out, "ccad");
    return out;
  }

  /// Copies checkpoint entries into this model's parameters; every parameter
  /// must be present with a matching shape.
  void load_params(const std::vector<std::pair<std::string, tensor::TensorT<T>>>& entries) {
    auto params = named_params();
    for (auto& [name, dst] : params) {
      const tensor::TensorT<T>* src = nullptr;
      for (const auto& [ename, e] : entries)
        if (ename == name) {
          src = &e;
          break;
        }
      if (!src) fail("CheckpointMismatch", "missing tensor '" + name + "'");
      if (src->shape() != dst.shape())
        fail("CheckpointMismatch", "tensor '" + name + "' shape " +
                                       tensor::shape_str(src->shape()) + " vs model " +
                                       tensor::shape_str(dst.shape()));
      dst.values() = src->values();
    }
  }
};

using Model = ModelT<float>;

}  // namespace mathrec::model

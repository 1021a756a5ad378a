#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mathrec/latex.hpp"
#include "mathrec/manifest.hpp"
#include "mathrec/metrics.hpp"
#include "mathrec/model.hpp"
#include "mathrec/tensor.hpp"

namespace mathrec::train {

// Loss mixing weights: lambda1 scales both recognizers, lambda2 the position
// heads, lambda3 the counting head.
struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 0.5;
  double lambda3 = 0.1;
};

/// Weighted sum of the component losses. l_ccad joins at lambda1 when the
/// auxiliary recognizer trains. Errors: NonFiniteLoss, InvalidArgument.
double total_loss(double l_rec, double l_pos, double l_counting, const LossWeights& weights = {},
                  double l_ccad = 0.0);

/// `key = value` lines; '#' starts a comment; blank lines skipped.
/// Errors: ConfigError (bad syntax, duplicate key).
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> load_config(const std::string& path);  // + IoFailure

struct TrainConfig {
  model::ModelConfig model;
  LossWeights weights;
  double lr = 3e-4;
  double warmup_frac = 0.05;
  double clip_norm = 1.0;
  int batch_size = 8;
  int steps = 200;
  std::uint64_t seed = 0;
  int eval_every = 0;               // 0 = evaluate only at the end
  int log_every = 1;
  double early_stop_exprate = 0.0;  // percent; 0 disables
  int max_len = 48;                 // decode cap during evaluation
  bool scale_aug = false;           // random rescale in [0.7, 1.4]
};

void validate(const TrainConfig& cfg);

/// Builds a config from parsed key/value pairs; unrecognized keys are errors.
/// Errors: ConfigError.
TrainConfig config_from_map(const std::map<std::string, std::string>& kv);

/// Canonical (key, value) serialization; config_from_map round-trips it.
std::vector<std::pair<std::string, std::string>> config_items(const TrainConfig& cfg);

/// FNV-1a over the canonical serialization. Stable across runs.
std::uint64_t config_hash(const TrainConfig& cfg);

/// Piecewise schedule: linear warmup over ceil(warmup_frac * steps) steps,
/// then cosine decay to zero at cfg.steps. `step` is zero-based.
double lr_at(const TrainConfig& cfg, int step);

// Adam with bias correction, no weight decay. Moments sit in flat arrays
// parallel to the parameter list, so checkpoints can restore them exactly.
struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long t = 0;
  std::vector<std::vector<float>> m, v;

  void init(const std::vector<std::pair<std::string, tensor::Tensor>>& params);
  void step(std::vector<std::pair<std::string, tensor::Tensor>>& params, double lr);
};

double global_grad_norm(const std::vector<std::pair<std::string, tensor::Tensor>>& params);
void scale_grads(std::vector<std::pair<std::string, tensor::Tensor>>& params, double factor);

/// Full training state on disk: parameters, Adam moments, step counter,
/// config (canonical lines, FNV-1a hash) and the vocab, all in one file.
void save_train_checkpoint(const std::string& path, const model::Model& model,
                           const latex::Vocab& vocab, const TrainConfig& cfg, int step,
                           const Adam* opt);

struct LoadedCheckpoint {
  TrainConfig cfg;
  latex::Vocab vocab;
  int step = 0;
  long long opt_t = 0;
  tensor::CheckpointData<float> raw;
};

LoadedCheckpoint read_train_checkpoint(const std::string& path);

/// Rebuilds the model a checkpoint describes (config + vocab + weights).
model::Model model_from_checkpoint(const LoadedCheckpoint& ckpt);

struct FitOptions {
  std::string checkpoint_path;  // final state lands here; best adds ".best"
  std::string resume_path;      // continue from a saved state
  std::ostream* log = nullptr;  // defaults to std::cout
  int stop_after = 0;           // pause once this many total steps ran (0 = cfg.steps)
};

struct FitResult {
  int steps_run = 0;
  double best_exprate = -1.0;  // percent; -1 when never evaluated
  int best_step = -1;
  bool early_stopped = false;
  double final_total = 0.0;
};

/// Runs the training loop: stateless per-step batch sampling, gradient
/// accumulation over batch_size per-sample graphs, clipping, Adam, periodic
/// greedy-decode evaluation with best-checkpoint tracking. Deterministic for
/// a given (config, data); stop/resume reproduces the straight run bit for
/// bit. Errors: NonFiniteLoss, NonFiniteGrad, CheckpointMismatch, EmptyCorpus.
FitResult fit(model::Model& model, const TrainConfig& cfg, const latex::Vocab& vocab,
              const std::vector<data::ExprSample>& train_set,
              const std::vector<data::ExprSample>& val_set, const FitOptions& opt = {});

/// Greedy-decodes every sample and scores it against the ground truth.
metrics::MetricsReport evaluate_model(const model::Model& model, const latex::Vocab& vocab,
                                      const std::vector<data::ExprSample>& samples, int max_len);

}  // namespace mathrec::train

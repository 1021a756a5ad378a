#include "mathrec/trainer.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "mathrec/synth.hpp"

namespace mathrec::train {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt(const char* spec, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

double parse_double(const std::string& key, const std::string& value) {
  size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != value.size())
    fail("ConfigError", "key '" + key + "': expected a number, got '" + value + "'");
  return v;
}

long long parse_int(const std::string& key, const std::string& value) {
  size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != value.size())
    fail("ConfigError", "key '" + key + "': expected an integer, got '" + value + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != value.size() || value.find('-') != std::string::npos)
    fail("ConfigError", "key '" + key + "': expected an unsigned integer, got '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  fail("ConfigError", "key '" + key + "': expected 0/1/true/false, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::string item;
  std::stringstream ss(value);
  while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(parse_int(key, trim(item))));
  if (out.empty()) fail("ConfigError", "key '" + key + "': expected a comma-separated list");
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

int pick_index(std::mt19937_64& rng, int n) {
  int i = static_cast<int>(tensor::uniform01(rng) * n);
  return i < n ? i : n - 1;
}

data::Image rescale(const data::Image& in, double factor) {
  // Never shrink below the backbone stride.
  int oh = std::max(8, static_cast<int>(std::lround(in.height * factor)));
  int ow = std::max(8, static_cast<int>(std::lround(in.width * factor)));
  data::Image out(oh, ow);
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      int sr = std::min(in.height - 1, static_cast<int>((r + 0.5) * in.height / oh));
      int sc = std::min(in.width - 1, static_cast<int>((c + 0.5) * in.width / ow));
      out.at(r, c) = in.at(sr, sc);
    }
  return out;
}

model::Targets targets_from(const data::ExprSample& sample, const latex::Vocab& vocab) {
  model::Targets tgt;
  tgt.classes = vocab.encode_ids(sample.tokens);
  tgt.depths = sample.labels.depth;
  tgt.relpos.reserve(sample.labels.relpos.size());
  for (auto rp : sample.labels.relpos) tgt.relpos.push_back(static_cast<int>(rp));
  tgt.counts = sample.counts;
  return tgt;
}

}  // namespace

double total_loss(double l_rec, double l_pos, double l_counting, const LossWeights& w,
                  double l_ccad) {
  for (double lam : {w.lambda1, w.lambda2, w.lambda3})
    if (!std::isfinite(lam) || lam < 0)
      fail("InvalidArgument", "loss weights must be finite and non-negative");
  for (double l : {l_rec, l_pos, l_counting, l_ccad})
    if (!std::isfinite(l)) fail("NonFiniteLoss", "non-finite loss component");
  return w.lambda1 * l_rec + w.lambda2 * l_pos + w.lambda3 * l_counting + w.lambda1 * l_ccad;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail("ConfigError", "line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      fail("ConfigError", "line " + std::to_string(lineno) + ": missing key before '='");
    if (value.empty())
      fail("ConfigError", "line " + std::to_string(lineno) + ": key '" + key + "' has no value");
    if (!kv.emplace(key, value).second)
      fail("ConfigError", "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return kv;
}

std::map<std::string, std::string> load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("IoFailure", "cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void validate(const TrainConfig& cfg) {
  model::validate(cfg.model);
  for (double lam : {cfg.weights.lambda1, cfg.weights.lambda2, cfg.weights.lambda3})
    if (!std::isfinite(lam) || lam < 0)
      fail("ConfigError", "loss weights must be finite and non-negative");
  if (!std::isfinite(cfg.lr) || cfg.lr <= 0) fail("ConfigError", "lr must be positive");
  if (!std::isfinite(cfg.warmup_frac) || cfg.warmup_frac < 0 || cfg.warmup_frac > 1)
    fail("ConfigError", "warmup_frac must lie in [0, 1]");
  if (!std::isfinite(cfg.clip_norm) || cfg.clip_norm < 0)
    fail("ConfigError", "clip_norm must be >= 0");
  if (cfg.batch_size < 1) fail("ConfigError", "batch_size must be >= 1");
  if (cfg.steps < 1) fail("ConfigError", "steps must be >= 1");
  if (cfg.eval_every < 0) fail("ConfigError", "eval_every must be >= 0");
  if (cfg.log_every < 1) fail("ConfigError", "log_every must be >= 1");
  if (!std::isfinite(cfg.early_stop_exprate) || cfg.early_stop_exprate < 0 ||
      cfg.early_stop_exprate > 100)
    fail("ConfigError", "early_stop_exprate must lie in [0, 100]");
  if (cfg.max_len < 1) fail("ConfigError", "max_len must be >= 1");
}

TrainConfig config_from_map(const std::map<std::string, std::string>& kv) {
  TrainConfig cfg;
  for (const auto& [key, value] : kv) {
    auto as_int = [&] { return static_cast<int>(parse_int(key, value)); };
    if (key == "growth_rate") cfg.model.backbone.growth_rate = as_int();
    else if (key == "block_layers") cfg.model.backbone.block_layers = parse_int_list(key, value);
    else if (key == "initial_channels") cfg.model.backbone.initial_channels = as_int();
    else if (key == "reduction") cfg.model.backbone.reduction = parse_double(key, value);
    else if (key == "model_dim") cfg.model.transformer.model_dim = as_int();
    else if (key == "heads") cfg.model.transformer.heads = as_int();
    else if (key == "ffn_dim") cfg.model.transformer.ffn_dim = as_int();
    else if (key == "decoder_layers") cfg.model.transformer.layers = as_int();
    else if (key == "refine") cfg.model.transformer.refine = parse_bool(key, value);
    else if (key == "task1") cfg.model.task1 = parse_bool(key, value);
    else if (key == "multi_view") cfg.model.multi_view = parse_bool(key, value);
    else if (key == "task2") cfg.model.task2 = parse_bool(key, value);
    else if (key == "channel_attn") cfg.model.channel_attn = parse_bool(key, value);
    else if (key == "attn_ratio") cfg.model.attn_ratio = as_int();
    else if (key == "count_feature_dim") cfg.model.count_feature_dim = as_int();
    else if (key == "ccad_embed_dim") cfg.model.ccad.embed_dim = as_int();
    else if (key == "ccad_hidden_dim") cfg.model.ccad.hidden_dim = as_int();
    else if (key == "ccad_attn_dim") cfg.model.ccad.attn_dim = as_int();
    else if (key == "ccad_coverage_channels") cfg.model.ccad.coverage_channels = as_int();
    else if (key == "ccad_coverage_kernel") cfg.model.ccad.coverage_kernel = as_int();
    else if (key == "lambda1") cfg.weights.lambda1 = parse_double(key, value);
    else if (key == "lambda2") cfg.weights.lambda2 = parse_double(key, value);
    else if (key == "lambda3") cfg.weights.lambda3 = parse_double(key, value);
    else if (key == "lr") cfg.lr = parse_double(key, value);
    else if (key == "warmup_frac") cfg.warmup_frac = parse_double(key, value);
    else if (key == "clip_norm") cfg.clip_norm = parse_double(key, value);
    else if (key == "batch_size") cfg.batch_size = as_int();
    else if (key == "steps") cfg.steps = as_int();
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "eval_every") cfg.eval_every = as_int();
    else if (key == "log_every") cfg.log_every = as_int();
    else if (key == "early_stop_exprate") cfg.early_stop_exprate = parse_double(key, value);
    else if (key == "max_len") cfg.max_len = as_int();
    else if (key == "scale_aug") cfg.scale_aug = parse_bool(key, value);
    else fail("ConfigError", "unknown key '" + key + "'");
  }
  validate(cfg);
  return cfg;
}

std::vector<std::pair<std::string, std::string>> config_items(const TrainConfig& cfg) {
  auto num = [](double v) { return fmt("%.17g", v); };
  std::vector<std::pair<std::string, std::string>> items;
  items.emplace_back("growth_rate", std::to_string(cfg.model.backbone.growth_rate));
  items.emplace_back("block_layers", join_ints(cfg.model.backbone.block_layers));
  items.emplace_back("initial_channels", std::to_string(cfg.model.backbone.initial_channels));
  items.emplace_back("reduction", num(cfg.model.backbone.reduction));
  items.emplace_back("model_dim", std::to_string(cfg.model.transformer.model_dim));
  items.emplace_back("heads", std::to_string(cfg.model.transformer.heads));
  items.emplace_back("ffn_dim", std::to_string(cfg.model.transformer.ffn_dim));
  items.emplace_back("decoder_layers", std::to_string(cfg.model.transformer.layers));
  items.emplace_back("refine", cfg.model.transformer.refine ? "1" : "0");
  items.emplace_back("task1", cfg.model.task1 ? "1" : "0");
  items.emplace_back("multi_view", cfg.model.multi_view ? "1" : "0");
  items.emplace_back("task2", cfg.model.task2 ? "1" : "0");
  items.emplace_back("channel_attn", cfg.model.channel_attn ? "1" : "0");
  items.emplace_back("attn_ratio", std::to_string(cfg.model.attn_ratio));
  items.emplace_back("count_feature_dim", std::to_string(cfg.model.count_feature_dim));
  items.emplace_back("ccad_embed_dim", std::to_string(cfg.model.ccad.embed_dim));
  items.emplace_back("ccad_hidden_dim", std::to_string(cfg.model.ccad.hidden_dim));
  items.emplace_back("ccad_attn_dim", std::to_string(cfg.model.ccad.attn_dim));
  items.emplace_back("ccad_coverage_channels", std::to_string(cfg.model.ccad.coverage_channels));
  items.emplace_back("ccad_coverage_kernel", std::to_string(cfg.model.ccad.coverage_kernel));
  items.emplace_back("lambda1", num(cfg.weights.lambda1));
  items.emplace_back("lambda2", num(cfg.weights.lambda2));
  items.emplace_back("lambda3", num(cfg.weights.lambda3));
  items.emplace_back("lr", num(cfg.lr));
  items.emplace_back("warmup_frac", num(cfg.warmup_frac));
  items.emplace_back("clip_norm", num(cfg.clip_norm));
  items.emplace_back("batch_size", std::to_string(cfg.batch_size));
  items.emplace_back("steps", std::to_string(cfg.steps));
  items.emplace_back("seed", std::to_string(cfg.seed));
  items.emplace_back("eval_every", std::to_string(cfg.eval_every));
  items.emplace_back("log_every", std::to_string(cfg.log_every));
  items.emplace_back("early_stop_exprate", num(cfg.early_stop_exprate));
  items.emplace_back("max_len", std::to_string(cfg.max_len));
  items.emplace_back("scale_aug", cfg.scale_aug ? "1" : "0");
  return items;
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  for (const auto& [k, v] : config_items(cfg)) {
    mix(k);
    mix("=");
    mix(v);
    mix("\n");
  }
  return h;
}

double lr_at(const TrainConfig& cfg, int step) {
  const int warmup = static_cast<int>(std::ceil(cfg.warmup_frac * cfg.steps));
  if (step < warmup) return cfg.lr * (step + 1) / warmup;
  const int span = std::max(1, cfg.steps - warmup);
  const double progress = std::min(1.0, static_cast<double>(step - warmup) / span);
  return cfg.lr * 0.5 * (1.0 + std::cos(progress * 3.14159265358979323846));
}

void Adam::init(const std::vector<std::pair<std::string, tensor::Tensor>>& params) {
  t = 0;
  m.assign(params.size(), {});
  v.assign(params.size(), {});
  for (size_t i = 0; i < params.size(); ++i) {
    m[i].assign(params[i].second.size(), 0.0f);
    v[i].assign(params[i].second.size(), 0.0f);
  }
}

void Adam::step(std::vector<std::pair<std::string, tensor::Tensor>>& params, double lr) {
  if (m.size() != params.size()) fail("InvalidArgument", "optimizer not initialized");
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& values = params[i].second.values();
    const auto& grad = params[i].second.grad();
    for (size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      const double mi = beta1 * m[i][j] + (1.0 - beta1) * g;
      const double vi = beta2 * v[i][j] + (1.0 - beta2) * g * g;
      m[i][j] = static_cast<float>(mi);
      v[i][j] = static_cast<float>(vi);
      values[j] = static_cast<float>(values[j] - lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps));
    }
  }
}

double global_grad_norm(const std::vector<std::pair<std::string, tensor::Tensor>>& params) {
  double sq = 0;
  for (const auto& [name, p] : params)
    for (float g : p.grad()) sq += static_cast<double>(g) * g;
  return std::sqrt(sq);
}

void scale_grads(std::vector<std::pair<std::string, tensor::Tensor>>& params, double factor) {
  for (auto& [name, p] : params)
    for (float& g : p.grad()) g = static_cast<float>(g * factor);
}

void save_train_checkpoint(const std::string& path, const model::Model& model,
                           const latex::Vocab& vocab, const TrainConfig& cfg, int step,
                           const Adam* opt) {
  std::vector<std::string> header;
  header.push_back("format mathrec-train 1");
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  header.push_back(std::string("config_hash ") + hex);
  header.push_back("step " + std::to_string(step));
  header.push_back("opt_t " + std::to_string(opt ? opt->t : 0));
  for (const auto& [k, v] : config_items(cfg)) header.push_back("config " + k + " = " + v);
  std::stringstream vt(vocab.to_text());
  std::string line;
  while (std::getline(vt, line)) header.push_back("vocab " + line);

  auto entries = model.named_params();
  if (opt) {
    const size_t n = entries.size();
    if (opt->m.size() != n) fail("InvalidArgument", "optimizer state does not match the model");
    entries.reserve(3 * n);  // appends below must not invalidate entries[i]
    for (size_t i = 0; i < n; ++i) {
      const auto& [name, p] = entries[i];
      entries.emplace_back("opt.m." + name, tensor::Tensor::from(p.shape(), opt->m[i]));
      entries.emplace_back("opt.v." + name, tensor::Tensor::from(p.shape(), opt->v[i]));
    }
  }
  tensor::save_checkpoint(path, header, entries);
}

LoadedCheckpoint read_train_checkpoint(const std::string& path) {
  LoadedCheckpoint out;
  out.raw = tensor::load_checkpoint<float>(path);
  const auto& header = out.raw.header;
  if (header.empty() || header[0] != "format mathrec-train 1")
    fail("CheckpointMismatch", "'" + path + "' is not a training checkpoint");
  std::map<std::string, std::string> kv;
  std::string vocab_text, stored_hash;
  for (size_t i = 1; i < header.size(); ++i) {
    const std::string& h = header[i];
    auto sp = h.find(' ');
    std::string tag = h.substr(0, sp);
    std::string rest = sp == std::string::npos ? "" : h.substr(sp + 1);
    if (tag == "config_hash") stored_hash = rest;
    else if (tag == "step") out.step = static_cast<int>(parse_int("step", rest));
    else if (tag == "opt_t") out.opt_t = parse_int("opt_t", rest);
    else if (tag == "vocab") vocab_text += rest + "\n";
    else if (tag == "config") {
      auto eq = rest.find('=');
      if (eq == std::string::npos) fail("CheckpointMismatch", "malformed config line: " + h);
      kv[trim(rest.substr(0, eq))] = trim(rest.substr(eq + 1));
    } else fail("CheckpointMismatch", "unknown header line: " + h);
  }
  out.cfg = config_from_map(kv);
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(config_hash(out.cfg)));
  if (stored_hash != hex) fail("CheckpointMismatch", "config hash does not match its config");
  out.vocab = latex::Vocab::from_text(vocab_text);
  return out;
}

model::Model model_from_checkpoint(const LoadedCheckpoint& ckpt) {
  model::Model model;
  model.init(ckpt.cfg.model, ckpt.vocab.num_classes(), ckpt.cfg.seed);
  model.load_params(ckpt.raw.entries);
  return model;
}

metrics::MetricsReport evaluate_model(const model::Model& model, const latex::Vocab& vocab,
                                      const std::vector<data::ExprSample>& samples, int max_len) {
  std::vector<latex::TokenSeq> preds, truths;
  preds.reserve(samples.size());
  truths.reserve(samples.size());
  for (const auto& s : samples) {
    auto r = model.predict_ids(model::image_tensor<float>(s.image), max_len);
    preds.push_back(r.ids.empty() ? latex::TokenSeq{} : vocab.decode_ids(r.ids));
    truths.push_back(s.tokens);
  }
  return metrics::evaluate(preds, truths);
}

FitResult fit(model::Model& model, const TrainConfig& cfg, const latex::Vocab& vocab,
              const std::vector<data::ExprSample>& train_set,
              const std::vector<data::ExprSample>& val_set, const FitOptions& opt) {
  validate(cfg);
  if (train_set.empty()) fail("EmptyCorpus", "no training samples");
  std::ostream& log = opt.log ? *opt.log : std::cout;
  auto params = model.named_params();
  Adam adam;
  adam.init(params);

  int start_step = 0;
  if (!opt.resume_path.empty()) {
    auto ck = read_train_checkpoint(opt.resume_path);
    if (config_hash(ck.cfg) != config_hash(cfg))
      fail("CheckpointMismatch", "resume config differs from the current config");
    if (!(ck.vocab == vocab)) fail("CheckpointMismatch", "resume vocab differs from the corpus");
    model.load_params(ck.raw.entries);
    adam.t = ck.opt_t;
    for (size_t i = 0; i < params.size(); ++i) {
      for (const char* kind : {"m", "v"}) {
        const std::string want = std::string("opt.") + kind + "." + params[i].first;
        const tensor::Tensor* found = nullptr;
        for (const auto& [name, e] : ck.raw.entries)
          if (name == want) {
            found = &e;
            break;
          }
        if (!found) fail("CheckpointMismatch", "checkpoint lacks optimizer state '" + want + "'");
        if (found->size() != params[i].second.size())
          fail("CheckpointMismatch", "optimizer state '" + want + "' has the wrong size");
        auto& slot = *kind == 'm' ? adam.m[i] : adam.v[i];
        slot.assign(found->values().begin(), found->values().end());
      }
    }
    start_step = ck.step;
  }

  const int stop = opt.stop_after > 0 ? std::min(opt.stop_after, cfg.steps) : cfg.steps;
  FitResult res;
  double last_total = 0.0;
  const double inv = 1.0 / cfg.batch_size;
  const int n = static_cast<int>(train_set.size());

  for (int s = start_step; s < stop; ++s) {
    std::mt19937_64 rng(data::mix_seed(cfg.seed, static_cast<std::uint64_t>(s)));
    for (auto& [name, p] : params) p.zero_grad();
    double a_rec = 0, a_pos = 0, a_cnt = 0, a_ccad = 0;

    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto& sample = train_set[pick_index(rng, n)];
      data::Image img = sample.image;
      if (cfg.scale_aug) img = rescale(img, 0.7 + 0.7 * tensor::uniform01(rng));
      auto losses = model.forward_losses(model::image_tensor<float>(img),
                                         targets_from(sample, vocab));
      const double v_rec = losses.rec.item();
      const double v_pos = losses.pos.item();
      const double v_cnt = losses.cnt.defined() ? losses.cnt.item() : 0.0;
      const double v_ccad = losses.ccad_rec.defined() ? losses.ccad_rec.item() : 0.0;
      for (double l : {v_rec, v_pos, v_cnt, v_ccad})
        if (!std::isfinite(l))
          fail("NonFiniteLoss", "step " + std::to_string(s) + ": non-finite loss component");
      a_rec += v_rec * inv;
      a_pos += v_pos * inv;
      a_cnt += v_cnt * inv;
      a_ccad += v_ccad * inv;

      auto total = tensor::add(tensor::mul_scalar(losses.rec, static_cast<float>(cfg.weights.lambda1 * inv)),
                               tensor::mul_scalar(losses.pos, static_cast<float>(cfg.weights.lambda2 * inv)));
      if (losses.cnt.defined())
        total = tensor::add(total, tensor::mul_scalar(losses.cnt, static_cast<float>(cfg.weights.lambda3 * inv)));
      if (losses.ccad_rec.defined())
        total = tensor::add(total, tensor::mul_scalar(losses.ccad_rec, static_cast<float>(cfg.weights.lambda1 * inv)));
      total.backward();
    }

    const double norm = global_grad_norm(params);
    if (!std::isfinite(norm))
      fail("NonFiniteGrad", "step " + std::to_string(s) + ": non-finite gradient norm");
    if (cfg.clip_norm > 0 && norm > cfg.clip_norm) scale_grads(params, cfg.clip_norm / norm);
    adam.step(params, lr_at(cfg, s));

    last_total = total_loss(a_rec, a_pos, a_cnt, cfg.weights, a_ccad);
    ++res.steps_run;
    const int done = s + 1;
    if (done % cfg.log_every == 0 || done == stop)
      log << "step " << done << " rec " << fmt("%.9g", a_rec) << " pos " << fmt("%.9g", a_pos)
          << " cnt " << fmt("%.9g", a_cnt) << " ccad " << fmt("%.9g", a_ccad) << " total "
          << fmt("%.9g", last_total) << " lr " << fmt("%.6g", lr_at(cfg, s)) << "\n";

    const bool at_end = done == cfg.steps;
    if (!val_set.empty() && ((cfg.eval_every > 0 && done % cfg.eval_every == 0) || at_end)) {
      auto rep = evaluate_model(model, vocab, val_set, cfg.max_len);
      log << "eval step " << done << " exprate " << fmt("%.4f", rep.exprate) << " le1 "
          << fmt("%.4f", rep.le1) << " le2 " << fmt("%.4f", rep.le2) << " le3 "
          << fmt("%.4f", rep.le3) << " n " << rep.n_samples << "\n";
      if (rep.exprate > res.best_exprate) {
        res.best_exprate = rep.exprate;
        res.best_step = done;
        if (!opt.checkpoint_path.empty())
          save_train_checkpoint(opt.checkpoint_path + ".best", model, vocab, cfg, done, &adam);
      }
      if (cfg.early_stop_exprate > 0 && rep.exprate >= cfg.early_stop_exprate) {
        res.early_stopped = true;
        break;
      }
    }
  }

  res.final_total = last_total;
  if (!opt.checkpoint_path.empty())
    save_train_checkpoint(opt.checkpoint_path, model, vocab, cfg, start_step + res.steps_run,
                          &adam);
  return res;
}

}  // namespace mathrec::train

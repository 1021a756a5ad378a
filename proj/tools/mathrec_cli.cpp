// mathrec: position-forest recognition toolkit over synthetic and InkML data.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mathrec/cnn_viewer.hpp"
#include "mathrec/inkml.hpp"
#include "mathrec/manifest.hpp"
#include "mathrec/model.hpp"
#include "mathrec/raster.hpp"
#include "mathrec/synth.hpp"
#include "mathrec/trainer.hpp"
#include "mathrec/transformer.hpp"

namespace fs = std::filesystem;
using namespace mathrec;

namespace {

const char* relpos_name(forest::RelPos rp) {
  switch (rp) {
    case forest::RelPos::Upper: return "upper";
    case forest::RelPos::Lower: return "lower";
    default: return "middle";
  }
}

int cmd_labels(const std::string& expr, bool counts) {
  auto tokens = latex::tokenize(expr);
  if (counts) {
    auto vocab = latex::Vocab::build({tokens});
    auto vec = counting::count_vector(tokens, vocab);
    for (int k = 0; k < vocab.num_classes(); ++k)
      if (vec[k] != 0) std::cout << vocab.classes()[k] << "\t" << vec[k] << "\n";
    return 0;
  }
  auto labels = forest::encode_position_labels(tokens);
  for (size_t i = 0; i < tokens.size(); ++i)
    std::cout << tokens[i] << "\t" << labels.depth[i] << "\t"
              << relpos_name(labels.relpos[i]) << "\n";
  return 0;
}

int cmd_synth(const std::string& out, std::uint64_t seed, int n, int max_depth) {
  auto records = data::build_synthetic_corpus(out, seed, n, max_depth);
  std::cout << "wrote " << records.size() << " samples to " << out << "\n";
  return 0;
}

int cmd_ingest(const std::string& in_dir, const std::string& out_dir, int height) {
  std::vector<fs::path> files;
  if (!fs::is_directory(in_dir)) fail("IoFailure", "'" + in_dir + "' is not a directory");
  for (const auto& e : fs::directory_iterator(in_dir))
    if (e.path().extension() == ".inkml") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) fail("EmptyCorpus", "no .inkml files in '" + in_dir + "'");

  fs::create_directories(fs::path(out_dir) / "images");
  std::vector<latex::TokenSeq> corpus;
  std::vector<data::InkSample> samples;
  for (const auto& f : files) {
    samples.push_back(data::parse_inkml_file(f.string()));
    corpus.push_back(latex::tokenize(samples.back().truth));
  }
  auto vocab = latex::Vocab::build(corpus);

  std::vector<data::ManifestRecord> records;
  for (size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "images/%05zu.pgm", i);
    data::write_pgm(data::rasterize(samples[i].traces, height),
                    (fs::path(out_dir) / name).string());
    records.push_back(data::make_record(name, corpus[i], vocab));
  }
  data::write_manifest(records, (fs::path(out_dir) / "manifest.tsv").string());
  vocab.save((fs::path(out_dir) / "vocab.txt").string());
  std::cout << "ingested " << records.size() << " expressions to " << out_dir << "\n";
  return 0;
}

latex::Vocab vocab_beside(const std::string& manifest_path, const std::string& explicit_path) {
  if (!explicit_path.empty()) return latex::Vocab::load(explicit_path);
  return latex::Vocab::load((fs::path(manifest_path).parent_path() / "vocab.txt").string());
}

int cmd_train(const std::string& config_path, const std::string& train_manifest,
              const std::string& val_manifest, const std::string& out,
              const std::string& resume, int stop_after, long long seed_override,
              const std::string& vocab_path) {
  auto cfg = train::config_from_map(train::load_config(config_path));
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  auto vocab = vocab_beside(train_manifest, vocab_path);
  auto train_set = data::load_samples(train_manifest, vocab);
  auto val_set = val_manifest.empty() ? train_set : data::load_samples(val_manifest, vocab);

  model::Model model;
  model.init(cfg.model, vocab.num_classes(), cfg.seed);
  train::FitOptions opt;
  opt.checkpoint_path = out;
  opt.resume_path = resume;
  opt.stop_after = stop_after;
  auto res = train::fit(model, cfg, vocab, train_set, val_set, opt);
  std::cout << "trained " << res.steps_run << " steps";
  if (res.best_step >= 0)
    std::cout << ", best exprate " << res.best_exprate << " at step " << res.best_step;
  if (res.early_stopped) std::cout << " (early stop)";
  std::cout << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& manifest_path,
             const std::string& per_sample, int max_len) {
  auto ckpt = train::read_train_checkpoint(ckpt_path);
  auto model = train::model_from_checkpoint(ckpt);
  auto samples = data::load_samples(manifest_path, ckpt.vocab);
  if (max_len <= 0) max_len = ckpt.cfg.max_len;

  std::vector<latex::TokenSeq> preds, truths;
  for (const auto& s : samples) {
    auto r = model.predict_ids(model::image_tensor<float>(s.image), max_len);
    preds.push_back(r.ids.empty() ? latex::TokenSeq{} : ckpt.vocab.decode_ids(r.ids));
    truths.push_back(s.tokens);
  }
  auto report = metrics::evaluate(preds, truths);
  std::cout << metrics::format_report(report);

  if (!per_sample.empty()) {
    std::ofstream out(per_sample);
    if (!out) fail("IoFailure", "cannot write '" + per_sample + "'");
    for (size_t i = 0; i < preds.size(); ++i)
      out << report.distances[i] << "\t" << latex::join(preds[i]) << "\t"
          << latex::join(truths[i]) << "\n";
  }
  return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::vector<std::string>& images,
                const std::string& manifest_path, bool counts, int max_len) {
  auto ckpt = train::read_train_checkpoint(ckpt_path);
  auto model = train::model_from_checkpoint(ckpt);
  if (max_len <= 0) max_len = ckpt.cfg.max_len;

  std::vector<std::pair<std::string, data::Image>> inputs;
  for (const auto& p : images) inputs.emplace_back(p, data::read_pgm(p));
  if (!manifest_path.empty())
    for (const auto& s : data::load_samples(manifest_path, ckpt.vocab))
      inputs.emplace_back("", s.image);
  if (inputs.empty()) fail("UsageError", "predict needs --image or --manifest");

  for (size_t i = 0; i < inputs.size(); ++i) {
    const auto& [path, img] = inputs[i];
    std::string tag = path.empty() ? "sample " + std::to_string(i) : path;
    auto x = model::image_tensor<float>(img);
    auto r = model.predict_ids(x, max_len);
    std::cout << tag << "\t"
              << (r.ids.empty() ? "(empty)" : latex::join(ckpt.vocab.decode_ids(r.ids)))
              << (r.truncated ? "\t(truncated)" : "") << "\n";
    if (counts && model.cfg.task1) {
      auto c = model.predict_counts(x);
      std::cout << tag << "\tcounts";
      for (int k = 0; k < ckpt.vocab.num_classes(); ++k)
        if (c[k] >= 0.5) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.2f", c[k]);
          std::cout << " " << ckpt.vocab.classes()[k] << "=" << buf;
        }
      std::cout << "\n";
    }
  }
  return 0;
}

// 64-bit finite-difference sweep over every primitive, the composite modules,
// and the full tiny model. Thresholds: 1e-4 primitives, 1e-3 composites.
int cmd_gradcheck(std::uint64_t seed) {
  using TD = tensor::TensorT<double>;
  using V = const std::vector<TD>&;
  using namespace tensor;
  std::mt19937_64 r(seed);
  auto randt = [&](Shape s) {
    auto t = TD::zeros(std::move(s));
    for (auto& v : t.values()) v = uniform01(r) * 2 - 1;
    return t;
  };
  bool all_ok = true;
  double worst_prim = 0, worst_comp = 0;
  auto prim = [&](const char* name, auto fn, std::vector<TD> ins) {
    double e = grad_check(fn, ins, 1e-5);
    worst_prim = std::max(worst_prim, e);
    bool ok = e < 1e-4;
    all_ok = all_ok && ok;
    std::printf("primitive %-16s %.3e %s\n", name, e, ok ? "ok" : "FAIL");
  };

  prim("add", [](V v) { return sum(add(v[0], v[1])); }, {randt({3, 4}), randt({3, 4})});
  prim("sub_mul", [](V v) { return sum(mul(sub(v[0], v[1]), v[0])); },
       {randt({3, 4}), randt({3, 4})});
  prim("scalar", [](V v) { return mean(add_scalar(mul_scalar(v[0], 2.5), -1.0)); },
       {randt({5})});
  prim("relu", [](V v) { return sum(relu(v[0])); }, {randt({4, 3})});
  prim("sigmoid", [](V v) { return sum(sigmoid(v[0])); }, {randt({6})});
  prim("tanh", [](V v) { return sum(tanh(v[0])); }, {randt({6})});
  prim("matmul", [](V v) { return sum(matmul(v[0], v[1])); }, {randt({3, 4}), randt({4, 2})});
  prim("transpose", [](V v) { return sum(mul(transpose(v[0]), transpose(v[0]))); },
       {randt({3, 4})});
  prim("add_axis0", [](V v) { return sum(mul(add_axis(v[0], v[1], 0), v[0])); },
       {randt({3, 4}), randt({3})});
  prim("add_axis1", [](V v) { return sum(mul(add_axis(v[0], v[1], 1), v[0])); },
       {randt({3, 4}), randt({4})});
  prim("mul_axis0", [](V v) { return sum(mul(mul_axis(v[0], v[1], 0), v[0])); },
       {randt({3, 4}), randt({3})});
  prim("softmax", [](V v) { return sum(mul(softmax(v[0], 1), v[1])); },
       {randt({3, 5}), randt({3, 5})});
  prim("log_softmax", [](V v) { return sum(mul(log_softmax(v[0], 0), v[1])); },
       {randt({3, 5}), randt({3, 5})});
  prim("layer_norm", [](V v) { return sum(mul(layer_norm(v[0], 1), v[1])); },
       {randt({3, 5}), randt({3, 5})});
  prim("conv2d", [](V v) { return sum(mul(conv2d(v[0], v[1], 1, 1), conv2d(v[0], v[1], 1, 1))); },
       {randt({2, 5, 6}), randt({3, 2, 3, 3})});
  prim("conv2d_s2", [](V v) { return sum(conv2d(v[0], v[1], 2, 3)); },
       {randt({1, 9, 10}), randt({2, 1, 7, 7})});
  prim("avg_pool2d", [](V v) { return sum(mul(avg_pool2d(v[0], 2, 2, true),
                                              avg_pool2d(v[0], 2, 2, true))); },
       {randt({2, 5, 7})});
  prim("sum_pool2d", [](V v) { return sum(mul(sum_pool2d(v[0]), sum_pool2d(v[0]))); },
       {randt({3, 4, 5})});
  prim("global_avg_pool", [](V v) { return sum(mul(global_avg_pool(v[0]), global_avg_pool(v[0]))); },
       {randt({3, 4, 5})});
  prim("reshape", [](V v) { return sum(mul(reshape(v[0], {6, 2}), reshape(v[0], {6, 2}))); },
       {randt({3, 4})});
  prim("concat0", [](V v) { return sum(mul(concat(v[0], v[1], 0), concat(v[0], v[1], 0))); },
       {randt({2, 3}), randt({4, 3})});
  prim("concat1", [](V v) { return sum(mul(concat(v[0], v[1], 1), concat(v[0], v[1], 1))); },
       {randt({2, 3}), randt({2, 2})});
  prim("narrow", [](V v) { return sum(mul(narrow(v[0], 1, 1, 2), narrow(v[0], 1, 1, 2))); },
       {randt({3, 5})});
  prim("embedding", [](V v) { return sum(mul(embedding(v[0], {0, 2, 2, 1}),
                                             embedding(v[0], {0, 2, 2, 1}))); },
       {randt({4, 3})});
  prim("nll", [](V v) { return nll_from_logprobs(log_softmax(v[0], 1), {1, 0, 2}); },
       {randt({3, 4})});
  prim("huber_mean", [](V v) { return huber_mean(v[0]); }, {randt({7})});
  prim("causal_mask", [](V v) { return sum(mul(softmax(causal_mask(v[0]), 1), v[1])); },
       {randt({4, 4}), randt({4, 4})});
  prim("coverage_softmax", [](V v) { return sum(mul(coverage_softmax(v[0], v[1]), v[2])); },
       {randt({4, 5}), TD::full({1}, 0.8), randt({4, 5})});

  auto comp = [&](const char* name, auto fn, std::vector<TD>& ins) {
    double e = grad_check(fn, ins, 1e-4);
    worst_comp = std::max(worst_comp, e);
    bool ok = e < 1e-3;
    all_ok = all_ok && ok;
    std::printf("composite %-16s %.3e %s\n", name, e, ok ? "ok" : "FAIL");
  };

  {  // GRU cell over three chained steps
    GruParams<double> p;
    std::vector<TD> ins = {randt({1, 3}), randt({1, 4})};
    auto w = [&] { return randt({3, 4}); };
    auto u = [&] { return randt({4, 4}); };
    auto b = [&] { return randt({4}); };
    p.w_z = w(); p.u_z = u(); p.b_z = b();
    p.w_r = w(); p.u_r = u(); p.b_r = b();
    p.w_h = w(); p.u_h = u(); p.b_h = b();
    ins.push_back(p.w_z); ins.push_back(p.u_z); ins.push_back(p.b_z);
    ins.push_back(p.w_r); ins.push_back(p.u_r); ins.push_back(p.b_r);
    ins.push_back(p.w_h); ins.push_back(p.u_h); ins.push_back(p.b_h);
    comp("gru_cell", [&p](V v) {
      auto h = gru_cell(v[0], v[1], p);
      h = gru_cell(v[0], h, p);
      return sum(gru_cell(v[0], h, p));
    }, ins);
  }
  {  // squeeze-excitation gate
    model::ChannelAttention<double> attn;
    std::mt19937_64 ar(seed + 1);
    attn.init(6, 2, ar);
    std::vector<TD> ins = {randt({6, 3, 4}), attn.squeeze.w, attn.squeeze.b, attn.excite.w,
                           attn.excite.b};
    comp("channel_attn", [&attn](V v) { return sum(attn.forward(v[0])); }, ins);
  }
  {  // two-branch counting module against a fixed target
    model::MscmT<double> mscm;
    std::mt19937_64 mr(seed + 2);
    mscm.init(4, 3, 5, 2, true, mr);
    std::vector<TD> ins = {randt({4, 5, 6})};
    std::vector<std::pair<std::string, TD>> ps;
    mscm.register_params(ps, "mscm");
    for (auto& [n, p] : ps) ins.push_back(p);
    comp("mscm_smooth_l1", [&mscm](V v) {
      auto out = mscm.forward(v[0]);
      return model::loss_counting(out.count_pred, {1.0, 0.0, 2.0});
    }, ins);
  }
  {  // full tiny model, all four losses at the default weights
    model::ModelConfig mc;
    mc.backbone = {2, {1}, 4, 0.5};
    mc.transformer.model_dim = 8;
    mc.transformer.heads = 2;
    mc.transformer.ffn_dim = 12;
    mc.transformer.layers = 2;
    mc.count_feature_dim = 4;
    mc.ccad = {4, 6, 6, 2, 3};
    mc.task2 = true;
    model::ModelT<double> m;
    m.init(mc, 3, seed + 3);
    auto img = TD::zeros({1, 8, 16});
    std::mt19937_64 ir(seed + 4);
    for (auto& v : img.values()) v = uniform01(ir);
    model::Targets t;
    t.classes = {0, 2, 1};
    t.depths = {0, 1, 0};
    t.relpos = {0, 1, 2};
    t.counts = {1, 1, 1};
    auto params = m.named_params();
    std::vector<TD> ins;
    for (auto& [n, p] : params) ins.push_back(p);
    comp("full_model", [&](V) {
      auto l = m.forward_losses(img, t);
      auto total = add(mul_scalar(l.rec, 1.0), mul_scalar(l.pos, 0.5));
      total = add(total, mul_scalar(l.cnt, 0.1));
      return add(total, mul_scalar(l.ccad_rec, 1.0));
    }, ins);
  }

  std::printf("max primitive %.3e (< 1e-4), max composite %.3e (< 1e-3): %s\n", worst_prim,
              worst_comp, all_ok ? "ok" : "FAIL");
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"position-forest math expression recognition toolkit"};
  app.require_subcommand(1);
  std::function<int()> action;

  auto* labels = app.add_subcommand("labels", "Position/count labels for a LaTeX expression");
  {
    auto expr = std::make_shared<std::string>();
    auto counts = std::make_shared<bool>(false);
    labels->add_option("--expr", *expr, "math-mode LaTeX source")->required();
    labels->add_flag("--counts", *counts, "print symbol counts instead of position labels");
    labels->callback([&action, expr, counts] {
      action = [expr, counts] { return cmd_labels(*expr, *counts); };
    });
  }

  auto* synth = app.add_subcommand("synth", "Render a synthetic expression corpus");
  {
    auto out = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto n = std::make_shared<int>(64);
    auto depth = std::make_shared<int>(2);
    synth->add_option("--out", *out, "output directory")->required();
    synth->add_option("--seed", *seed, "RNG seed (default 0)");
    synth->add_option("--n", *n, "number of expressions");
    synth->add_option("--max-depth", *depth, "maximum nesting depth");
    synth->callback([&action, out, seed, n, depth] {
      action = [out, seed, n, depth] { return cmd_synth(*out, *seed, *n, *depth); };
    });
  }

  auto* ingest = app.add_subcommand("ingest", "Convert an InkML directory to a manifest");
  {
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto height = std::make_shared<int>(64);
    ingest->add_option("--in", *in, "directory of .inkml files")->required();
    ingest->add_option("--out", *out, "output directory")->required();
    ingest->add_option("--height", *height, "rasterized image height");
    ingest->callback([&action, in, out, height] {
      action = [in, out, height] { return cmd_ingest(*in, *out, *height); };
    });
  }

  auto* tr = app.add_subcommand("train", "Train from a config and a manifest");
  {
    auto config = std::make_shared<std::string>();
    auto train_m = std::make_shared<std::string>();
    auto val_m = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto resume = std::make_shared<std::string>();
    auto vocab = std::make_shared<std::string>();
    auto stop_after = std::make_shared<int>(0);
    auto seed = std::make_shared<long long>(-1);
    tr->add_option("--config", *config, "key = value config file")->required();
    tr->add_option("--train", *train_m, "training manifest")->required();
    tr->add_option("--val", *val_m, "validation manifest (default: the training set)");
    tr->add_option("--out", *out, "checkpoint output path")->required();
    tr->add_option("--resume", *resume, "checkpoint to continue from");
    tr->add_option("--vocab", *vocab, "vocab file (default: vocab.txt beside --train)");
    tr->add_option("--stop-after", *stop_after, "pause after this many total steps");
    tr->add_option("--seed", *seed, "override the config seed");
    tr->callback([&action, config, train_m, val_m, out, resume, vocab, stop_after, seed] {
      action = [=] {
        return cmd_train(*config, *train_m, *val_m, *out, *resume, *stop_after, *seed, *vocab);
      };
    });
  }

  auto* ev = app.add_subcommand("eval", "Score a checkpoint against a manifest");
  {
    auto ckpt = std::make_shared<std::string>();
    auto manifest = std::make_shared<std::string>();
    auto per_sample = std::make_shared<std::string>();
    auto max_len = std::make_shared<int>(0);
    ev->add_option("--ckpt", *ckpt, "trained checkpoint")->required();
    ev->add_option("--manifest", *manifest, "evaluation manifest")->required();
    ev->add_option("--per-sample", *per_sample, "write per-sample TSV here");
    ev->add_option("--max-len", *max_len, "decode length cap (default: from checkpoint)");
    ev->callback([&action, ckpt, manifest, per_sample, max_len] {
      action = [=] { return cmd_eval(*ckpt, *manifest, *per_sample, *max_len); };
    });
  }

  auto* pr = app.add_subcommand("predict", "Decode images with a trained checkpoint");
  {
    auto ckpt = std::make_shared<std::string>();
    auto images = std::make_shared<std::vector<std::string>>();
    auto manifest = std::make_shared<std::string>();
    auto counts = std::make_shared<bool>(false);
    auto max_len = std::make_shared<int>(0);
    pr->add_option("--ckpt", *ckpt, "trained checkpoint")->required();
    pr->add_option("--image", *images, "PGM image (repeatable)");
    pr->add_option("--manifest", *manifest, "decode every image in a manifest");
    pr->add_flag("--counts", *counts, "also print predicted symbol counts");
    pr->add_option("--max-len", *max_len, "decode length cap (default: from checkpoint)");
    pr->callback([&action, ckpt, images, manifest, counts, max_len] {
      action = [=] { return cmd_predict(*ckpt, *images, *manifest, *counts, *max_len); };
    });
  }

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference checks for every operation");
  {
    auto seed = std::make_shared<std::uint64_t>(0);
    gc->add_option("--seed", *seed, "RNG seed (default 0)");
    gc->callback([&action, seed] { action = [seed] { return cmd_gradcheck(*seed); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: UsageError: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
}

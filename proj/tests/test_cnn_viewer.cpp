#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mathrec/cnn_viewer.hpp"
#include "mathrec/counting.hpp"
#include "support.hpp"

using namespace mathrec;
using namespace mathrec::model;
using testsupport::kind_of;
using TD = tensor::TensorT<double>;

namespace {

TD demo_features(int c = 4, int h = 3, int w = 5) {
  std::vector<double> vals(static_cast<size_t>(c) * h * w);
  for (size_t i = 0; i < vals.size(); ++i) vals[i] = std::cos(0.31 * i);
  return TD::from({c, h, w}, std::move(vals));
}

}  // namespace

TEST_SUITE("cnn_viewer") {
  TEST_CASE("channel attention gates at exactly 0.5 when the excite layer is zero") {
    ChannelAttention<double> attn;
    std::mt19937_64 rng(3);
    attn.init(6, 2, rng);
    for (auto& v : attn.excite.w.values()) v = 0.0;
    for (auto& v : attn.excite.b.values()) v = 0.0;
    auto x = demo_features(6, 2, 2);
    auto y = attn.forward(x);
    for (size_t i = 0; i < x.size(); ++i)
      CHECK(y.values()[i] == doctest::Approx(0.5 * x.values()[i]).epsilon(1e-12));

    attn.enabled = false;
    auto z = attn.forward(x);
    for (size_t i = 0; i < x.size(); ++i) CHECK(z.values()[i] == x.values()[i]);
  }

  TEST_CASE("count predictions stay inside [0, cells]") {
    std::mt19937_64 rng(4);
    MscmT<double> mscm;
    mscm.init(4, 7, 5, 2, true, rng);
    auto feats = demo_features();
    auto out = mscm.forward(feats);
    REQUIRE(out.count_pred.shape() == tensor::Shape{7});
    for (double c : out.count_pred.values()) {
      CHECK(c > 0.0);
      CHECK(c < 15.0);  // 3x5 cells, sigmoid each
    }
    CHECK(out.count_feature.shape() == tensor::Shape{1, 5});

    MscmT<double> plain;
    std::mt19937_64 rng2(4);
    plain.init(4, 7, 5, 2, false, rng2);
    auto pout = plain.forward(feats);
    for (double c : pout.count_pred.values()) {
      CHECK(c > 0.0);
      CHECK(c < 15.0);
    }
  }

  TEST_CASE("multi-view counts are the mean of the two branches") {
    std::mt19937_64 rng(5);
    MscmT<double> mscm;
    mscm.init(4, 3, 4, 2, true, rng);
    auto feats = demo_features();
    auto out = mscm.forward(feats);
    auto a = mscm.branch3.forward(feats);
    auto b = mscm.branch5.forward(feats);
    for (int k = 0; k < 3; ++k)
      CHECK(out.count_pred.values()[k] ==
            doctest::Approx(0.5 * (a.values()[k] + b.values()[k])).epsilon(1e-12));
  }

  TEST_CASE("channel attention toggle reaches both branches") {
    std::mt19937_64 rng(6);
    MscmT<double> mscm;
    mscm.init(4, 3, 4, 2, true, rng);
    auto feats = demo_features();
    auto gated = mscm.forward(feats);
    mscm.set_channel_attention(false);
    CHECK(!mscm.branch3.attn.enabled);
    CHECK(!mscm.branch5.attn.enabled);
    auto plain = mscm.forward(feats);
    double diff = 0;
    for (int k = 0; k < 3; ++k)
      diff += std::abs(gated.count_pred.values()[k] - plain.count_pred.values()[k]);
    CHECK(diff > 0.0);
  }

  TEST_CASE("counting loss matches the scalar smooth-L1 kernel") {
    auto pred = TD::from({3}, {0.0, 0.5, 2.0});
    auto l = loss_counting(pred, {0.0, 0.0, 0.0});
    CHECK(l.item() == doctest::Approx((0.0 + 0.125 + 1.5) / 3.0).epsilon(1e-12));

    counting::CountVector p = {1.2, 0.3, 4.0, 2.5};
    counting::CountVector t = {1.0, 0.0, 2.0, 3.0};
    auto pt = TD::from({4}, {1.2, 0.3, 4.0, 2.5});
    CHECK(loss_counting(pt, t).item() ==
          doctest::Approx(counting::smooth_l1(p, t)).epsilon(1e-12));

    CHECK(kind_of([&] { loss_counting(pred, {0.0, 1.0}); }) == "ShapeMismatch");
  }

  TEST_CASE("coverage attention normalizes each step and accumulates") {
    CcadConfig cfg{4, 6, 6, 2, 3};
    CcadT<double> ccad;
    std::mt19937_64 rng(7);
    ccad.init(cfg, 3, 4, 2, rng);
    auto feats = demo_features(4, 2, 3);
    auto flat = tensor::transpose(tensor::reshape(feats, {4, 6}));
    auto cf = TD::from({1, 2}, {0.2, -0.1});
    auto state = ccad.initial_state(2, 3);
    int prev = ccad.sos_embed_id();
    for (int k = 1; k <= 4; ++k) {
      auto out = ccad.step(state, flat, cf, prev);
      double asum = 0;
      for (double a : out.attention.values()) asum += a;
      CHECK(asum == doctest::Approx(1.0).epsilon(1e-6));
      double csum = 0;
      for (double c : out.state.coverage.values()) csum += c;
      CHECK(csum == doctest::Approx(static_cast<double>(k)).epsilon(1e-5));
      CHECK(out.logits.shape() == tensor::Shape{1, 4});
      state = out.state;
      prev = k % 3;
    }
    CHECK(kind_of([&] { ccad.step(state, TD::zeros({5, 4}), cf, 0); }) == "ShapeMismatch");
  }

  TEST_CASE("sequence loss with a zeroed head is log(K+1)") {
    CcadConfig cfg{4, 6, 6, 2, 3};
    CcadT<double> ccad;
    std::mt19937_64 rng(8);
    ccad.init(cfg, 3, 4, 2, rng);
    for (auto& v : ccad.head.w.values()) v = 0.0;
    for (auto& v : ccad.head.b.values()) v = 0.0;
    auto feats = demo_features(4, 2, 3);
    auto cf = TD::from({1, 2}, {0.2, -0.1});
    auto l = ccad.sequence_loss(feats, cf, {0, 2, 1});
    CHECK(l.item() == doctest::Approx(std::log(4.0)).epsilon(1e-9));
  }
}

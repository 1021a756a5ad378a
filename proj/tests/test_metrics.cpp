#include <cstdint>
#include <random>

#include "doctest.h"
#include "mathrec/metrics.hpp"
#include "mathrec/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mathrec;
using latex::TokenSeq;
using testsupport::kind_of;

TEST_SUITE("metrics") {
  TEST_CASE("edit distance basics") {
    CHECK(metrics::edit_distance({"a", "b", "c"}, {"a", "b", "c"}) == 0);
    CHECK(metrics::edit_distance({"a", "b", "c"}, {"a", "x", "c"}) == 1);
    CHECK(metrics::edit_distance({"a", "b"}, {"a", "b", "c"}) == 1);
    CHECK(metrics::edit_distance({}, {"a", "b"}) == 2);
    CHECK(metrics::edit_distance({"a", "b"}, {}) == 2);
    CHECK(metrics::edit_distance({}, {}) == 0);
  }

  TEST_CASE("edit distance matches a full-matrix DP on random pairs") {
    std::mt19937_64 rng(99);
    auto vocab = data::grammar_vocab();
    for (int trial = 0; trial < 500; ++trial) {
      auto a = data::synth_expression(rng(), 2);
      auto b = data::synth_expression(rng(), 2);
      CHECK(metrics::edit_distance(a, b) == oracles::full_matrix_edit_distance(a, b));
    }
  }

  TEST_CASE("edit distance is a metric on samples") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      auto a = data::synth_expression(rng(), 2);
      auto b = data::synth_expression(rng(), 2);
      auto c = data::synth_expression(rng(), 2);
      const int ab = metrics::edit_distance(a, b);
      const int ba = metrics::edit_distance(b, a);
      CHECK(ab == ba);
      CHECK(metrics::edit_distance(a, a) == 0);
      CHECK(metrics::edit_distance(a, c) <= ab + metrics::edit_distance(b, c));
    }
  }

  TEST_CASE("evaluate per-threshold rates and monotone chain") {
    std::vector<TokenSeq> truths = {{"a"}, {"a", "b"}, {"a", "b", "c"}, {"a", "b", "c", "d"}};
    std::vector<TokenSeq> preds = {{"a"}, {"x", "b"}, {"x", "y", "c"}, {"x", "y", "z", "w"}};
    auto r = metrics::evaluate(preds, truths);  // distances 0, 1, 2, 4
    CHECK(r.n_samples == 4);
    CHECK(r.distances == std::vector<int>{0, 1, 2, 4});
    CHECK(r.exprate == doctest::Approx(25.0));
    CHECK(r.le1 == doctest::Approx(50.0));
    CHECK(r.le2 == doctest::Approx(75.0));
    CHECK(r.le3 == doctest::Approx(75.0));
    CHECK(r.exprate <= r.le1);
    CHECK(r.le1 <= r.le2);
    CHECK(r.le2 <= r.le3);
  }

  TEST_CASE("evaluate of perfect predictions is 100") {
    std::vector<TokenSeq> seqs = {{"x", "+", "y"}, {"\\alpha"}};
    auto r = metrics::evaluate(seqs, seqs);
    CHECK(r.exprate == doctest::Approx(100.0));
    CHECK(metrics::format_report(r).find("ExpRate 100.00") != std::string::npos);
  }

  TEST_CASE("report formatting is fixed order") {
    metrics::MetricsReport r;
    r.exprate = 12.5;
    r.le1 = 25.0;
    r.le2 = 50.0;
    r.le3 = 75.0;
    r.n_samples = 8;
    auto text = metrics::format_report(r);
    auto pos_exp = text.find("ExpRate");
    auto pos_le1 = text.find("<=1");
    auto pos_le2 = text.find("<=2");
    auto pos_le3 = text.find("<=3");
    auto pos_n = text.find("N");
    REQUIRE(pos_exp != std::string::npos);
    CHECK(pos_exp < pos_le1);
    CHECK(pos_le1 < pos_le2);
    CHECK(pos_le2 < pos_le3);
    CHECK(pos_le3 < pos_n);
  }

  TEST_CASE("evaluate failures") {
    CHECK(kind_of([] { metrics::evaluate({{"a"}}, {}); }) == "PairCountMismatch");
    CHECK(kind_of([] { metrics::evaluate({}, {}); }) == "EmptyEvaluation");
  }

  TEST_CASE("monotone chain on random reports") {
    std::mt19937_64 rng(3);
    std::vector<TokenSeq> preds, truths;
    for (int i = 0; i < 64; ++i) {
      preds.push_back(data::synth_expression(rng(), 2));
      truths.push_back(data::synth_expression(rng(), 2));
    }
    auto r = metrics::evaluate(preds, truths);
    CHECK(r.exprate <= r.le1);
    CHECK(r.le1 <= r.le2);
    CHECK(r.le2 <= r.le3);
    CHECK(r.le3 <= 100.0);
  }
}

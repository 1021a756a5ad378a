#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mathrec/image.hpp"
#include "mathrec/inkml.hpp"
#include "mathrec/manifest.hpp"
#include "mathrec/raster.hpp"
#include "mathrec/synth.hpp"
#include "support.hpp"

using namespace mathrec;
using testsupport::kind_of;
namespace fs = std::filesystem;

#ifndef MATHREC_DATA_DIR
#define MATHREC_DATA_DIR "data"
#endif

namespace {

fs::path tmp_dir(const char* name) {
  auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("pgm round trip") {
    data::Image img(3, 5);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 5; ++c) img.at(r, c) = static_cast<float>(r * 5 + c) / 14.0f;
    auto p = tmp_dir("mathrec_pgm") / "t.pgm";
    data::write_pgm(img, p.string());
    auto back = data::read_pgm(p.string());
    CHECK(back.height == 3);
    CHECK(back.width == 5);
    // 8-bit quantization: equal within one level
    for (size_t i = 0; i < img.pixels.size(); ++i)
      CHECK(std::abs(back.pixels[i] - img.pixels[i]) <= 1.0f / 255 + 1e-6f);
  }

  TEST_CASE("synth expressions are deterministic and parse") {
    for (std::uint64_t seed : {0ull, 1ull, 42ull}) {
      auto a = data::synth_expression(seed, 3);
      auto b = data::synth_expression(seed, 3);
      CHECK(a == b);
      CHECK(!forest::parse_forest(a).empty());
    }
    CHECK(data::synth_expression(0, 2) != data::synth_expression(1, 2));
  }

  TEST_CASE("grammar vocabulary is stable") {
    auto& terms = data::grammar_terminals();
    CHECK(terms.size() == 31);
    CHECK(std::is_sorted(terms.begin(), terms.end()));
    auto vocab = data::grammar_vocab();
    CHECK(vocab.num_classes() == 31);
  }

  TEST_CASE("render produces fixed-height ink") {
    auto img = data::render_synthetic(latex::tokenize("x^{2}+1"));
    CHECK(img.height == data::kRenderHeight);
    CHECK(img.width > 0);
    float ink = 0;
    for (float v : img.pixels) ink += v;
    CHECK(ink > 0);
  }

  TEST_CASE("manifest record derivation and round trip") {
    auto vocab = data::grammar_vocab();
    auto rec = data::make_record("images/x.pgm", latex::tokenize("x^{2}"), vocab);
    CHECK(rec.depths == std::vector<int>{0, 1, 1, 1, 1});
    CHECK(rec.counts.size() == 5);  // five distinct tokens, all count 1

    auto rec2 = data::make_record("images/y.pgm", latex::tokenize("\\frac{a}{a}"), vocab);
    auto dir = tmp_dir("mathrec_manifest");
    auto path = (dir / "manifest.tsv").string();
    data::write_manifest({rec, rec2}, path);
    auto loaded = data::load_manifest(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0] == rec);
    CHECK(loaded[1] == rec2);
  }

  TEST_CASE("manifest corruption names the line") {
    auto dir = tmp_dir("mathrec_corrupt");
    auto path = (dir / "manifest.tsv").string();
    {
      std::ofstream out(path);
      out << "images/a.pgm\tx ^ { 2 }\t0 1 1 1 1\tm u u u u\tx=1\n";
      out << "images/b.pgm\tx y\t0\tm m\ty=1 x=1\n";  // depth list too short
    }
    CHECK(kind_of([&] { data::load_manifest(path); }) == "CorruptRecord");
    try {
      data::load_manifest(path);
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK(kind_of([&] { data::write_manifest({}, path); }) == "InvalidArgument");
    CHECK(kind_of([&] { data::load_manifest((dir / "nope.tsv").string()); }) == "IoFailure");
  }

  TEST_CASE("synthetic corpus is byte-reproducible") {
    auto d1 = tmp_dir("mathrec_corpus1");
    auto d2 = tmp_dir("mathrec_corpus2");
    auto r1 = data::build_synthetic_corpus(d1.string(), 5, 8, 2);
    auto r2 = data::build_synthetic_corpus(d2.string(), 5, 8, 2);
    CHECK(r1 == r2);
    CHECK(slurp(d1 / "manifest.tsv") == slurp(d2 / "manifest.tsv"));
    CHECK(slurp(d1 / "vocab.txt") == slurp(d2 / "vocab.txt"));
    CHECK(slurp(d1 / "images" / "00003.pgm") == slurp(d2 / "images" / "00003.pgm"));
    auto r3 = data::build_synthetic_corpus(tmp_dir("mathrec_corpus3").string(), 6, 8, 2);
    CHECK(r1 != r3);
  }

  TEST_CASE("load_samples revalidates labels and counts") {
    auto dir = tmp_dir("mathrec_samples");
    data::build_synthetic_corpus(dir.string(), 9, 4, 2);
    auto vocab = latex::Vocab::load((dir / "vocab.txt").string());
    auto samples = data::load_samples((dir / "manifest.tsv").string(), vocab);
    REQUIRE(samples.size() == 4);
    for (const auto& s : samples) {
      CHECK(s.image.height == data::kRenderHeight);
      CHECK(s.labels == forest::encode_position_labels(s.tokens));
      CHECK(s.counts == counting::count_vector(s.tokens, vocab));
    }

    // tamper with a depth field: the loader must notice
    auto path = (dir / "manifest.tsv").string();
    auto text = slurp(path);
    auto pos = text.find("\t0 ");
    if (pos == std::string::npos) pos = text.find("\t0\t");
    REQUIRE(pos != std::string::npos);
    text[pos + 1] = '1';
    std::ofstream(path, std::ios::binary) << text;
    CHECK(kind_of([&] { data::load_samples(path, vocab); }) == "CorruptRecord");
  }

  TEST_CASE("inkml fixtures parse to expected traces and truths") {
    const fs::path base = MATHREC_DATA_DIR;
    auto a = data::parse_inkml_file((base / "inkml" / "sample_a.inkml").string());
    CHECK(a.traces.size() == 2);
    CHECK(a.truth == "x^{2}");
    auto b = data::parse_inkml_file((base / "inkml" / "sample_b.inkml").string());
    CHECK(b.traces.size() == 4);
    CHECK(b.truth == "\\frac{a}{b}");
    auto c = data::parse_inkml_file((base / "inkml" / "sample_c.inkml").string());
    CHECK(c.traces.size() == 4);
    CHECK(c.truth == "a + b");
    CHECK(a.traces[0].size() == 4);
    CHECK(a.traces[0][0][0] == doctest::Approx(100.0));
  }

  TEST_CASE("malformed inkml is rejected") {
    const fs::path base = MATHREC_DATA_DIR;
    CHECK(kind_of([&] {
            data::parse_inkml_file((base / "inkml_bad" / "broken.inkml").string());
          }) == "MalformedXml");
    CHECK(kind_of([] { data::parse_inkml("<ink><trace>1 2</trace></ink>"); }) == "MissingTruth");
    CHECK(kind_of([] {
            data::parse_inkml("<ink><annotation type=\"truth\">x</annotation></ink>");
          }) == "EmptyTraces");
  }

  TEST_CASE("rasterize fills the target height and stays binary-ish") {
    auto s = data::parse_inkml_file((fs::path(MATHREC_DATA_DIR) / "inkml" / "sample_a.inkml").string());
    auto img = data::rasterize(s.traces, 32);
    CHECK(img.height == 32);
    CHECK(img.width >= 1);
    float mx = 0, mn = 1;
    for (float v : img.pixels) {
      mx = std::max(mx, v);
      mn = std::min(mn, v);
    }
    CHECK(mx == 1.0f);
    CHECK(mn == 0.0f);
    // single point renders a dot, not a crash
    auto dot = data::rasterize({{{5.0, 7.0}}}, 16);
    float ink = 0;
    for (float v : dot.pixels) ink += v;
    CHECK(ink > 0);
  }
}

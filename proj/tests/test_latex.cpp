#include <filesystem>

#include "doctest.h"
#include "mathrec/latex.hpp"
#include "support.hpp"

using namespace mathrec;
using latex::TokenSeq;
using testsupport::kind_of;

TEST_SUITE("latex") {
  TEST_CASE("tokenize splits characters and commands") {
    CHECK(latex::tokenize("x^{2}") == TokenSeq{"x", "^", "{", "2", "}"});
    CHECK(latex::tokenize("a + b") == TokenSeq{"a", "+", "b"});
    CHECK(latex::tokenize("\\frac{a}{b}") == TokenSeq{"\\frac", "{", "a", "}", "{", "b", "}"});
    CHECK(latex::tokenize("\\alpha\\beta") == TokenSeq{"\\alpha", "\\beta"});
    CHECK(latex::tokenize("  x\t+\ny ") == TokenSeq{"x", "+", "y"});
  }

  TEST_CASE("tokenize failures") {
    CHECK(kind_of([] { latex::tokenize("\\nosuchcmd"); }) == "UnknownCommand");
    CHECK(kind_of([] { latex::tokenize("{x"); }) == "UnbalancedBraces");
    CHECK(kind_of([] { latex::tokenize("x}"); }) == "UnbalancedBraces");
    CHECK(kind_of([] { latex::tokenize("   "); }) == "EmptySequence");
    CHECK(kind_of([] { latex::tokenize(""); }) == "EmptySequence");
  }

  TEST_CASE("join inverts tokenize up to canonical spacing") {
    auto toks = latex::tokenize("x ^ { 2 }");
    CHECK(latex::join(toks) == "x ^ { 2 }");
    CHECK(latex::tokenize(latex::join(toks)) == toks);
  }

  TEST_CASE("vocab builds a sorted distinct class set") {
    auto vocab = latex::Vocab::build({{"b", "a"}, {"c", "a"}});
    CHECK(vocab.num_classes() == 3);
    CHECK(vocab.classes() == std::vector<std::string>{"a", "b", "c"});
    CHECK(vocab.encode("a") == 0);
    CHECK(vocab.encode("c") == 2);
    CHECK(vocab.lookup(1) == "b");
    CHECK(vocab.sos() == 3);
    CHECK(vocab.eos() == 4);
    CHECK(vocab.pad() == 5);
    CHECK(vocab.size() == 6);
  }

  TEST_CASE("vocab failures") {
    auto vocab = latex::Vocab::build({{"a"}});
    CHECK(kind_of([&] { (void)vocab.encode("z"); }) == "OutOfVocab");
    CHECK(kind_of([&] { (void)vocab.lookup(1); }) == "IdOutOfRange");
    CHECK(kind_of([&] { (void)vocab.lookup(-1); }) == "IdOutOfRange");
    CHECK(kind_of([] { latex::Vocab::build({}); }) == "EmptyCorpus");
  }

  TEST_CASE("vocab text round trip") {
    auto vocab = latex::Vocab::build({{"x", "+", "\\alpha"}});
    auto path = (std::filesystem::temp_directory_path() / "mathrec_vocab_rt.txt").string();
    vocab.save(path);
    auto loaded = latex::Vocab::load(path);
    CHECK(loaded == vocab);
    CHECK(latex::Vocab::from_text(vocab.to_text()) == vocab);
    std::filesystem::remove(path);
  }

  TEST_CASE("encode and decode ids round trip") {
    auto vocab = latex::Vocab::build({{"x", "y", "+"}});
    auto toks = TokenSeq{"y", "+", "x"};
    CHECK(vocab.decode_ids(vocab.encode_ids(toks)) == toks);
    CHECK(kind_of([&] { (void)vocab.decode_ids({}); }) == "EmptySequence");
    CHECK(kind_of([&] { (void)vocab.decode_ids({vocab.sos()}); }) == "IdOutOfRange");
  }
}

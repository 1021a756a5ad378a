#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mathrec/error.hpp"

namespace mathrec::latex {

// One LaTeX lexeme: a single character ("x", "+", "^") or a command ("\frac").
using Token = std::string;
using TokenSeq = std::vector<Token>;

/// Lex a math-mode LaTeX string into symbol tokens. Whitespace separates and
/// is never a token; commands are single tokens; braces must balance.
/// Errors: UnknownCommand, UnbalancedBraces, EmptySequence.
TokenSeq tokenize(const std::string& source);

bool is_command(const Token& token);

/// Space-joined rendering of a token sequence.
std::string join(const TokenSeq& seq);

/// Fixed command alphabet (CROHME coverage). Unknown commands fail loudly.
const std::vector<std::string>& supported_commands();

// Symbol alphabet plus reserved sos/eos/pad ids. Class ids are 0..num_classes);
// reserved ids follow in the order sos, eos, pad.
class Vocab {
 public:
  Vocab() = default;

  /// Sorted set of all distinct tokens in the corpus. Errors: EmptyCorpus.
  static Vocab build(const std::vector<TokenSeq>& corpus);
  static Vocab from_classes(std::vector<Token> classes);

  int encode(const Token& token) const;           // OutOfVocab
  const Token& lookup(int id) const;              // IdOutOfRange (reserved ids rejected)
  std::vector<int> encode_ids(const TokenSeq& seq) const;
  TokenSeq decode_ids(const std::vector<int>& ids) const;

  int num_classes() const { return static_cast<int>(classes_.size()); }
  int size() const { return num_classes() + 3; }  // with reserved
  int sos() const { return num_classes(); }
  int eos() const { return num_classes() + 1; }
  int pad() const { return num_classes() + 2; }
  const std::vector<Token>& classes() const { return classes_; }

  /// Plain text, one class per line, reserved tokens last, order significant.
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);
  std::string to_text() const;
  static Vocab from_text(const std::string& text);

  bool operator==(const Vocab& other) const { return classes_ == other.classes_; }

 private:
  std::vector<Token> classes_;
  std::unordered_map<Token, int> index_;

  void rebuild_index();
};

}  // namespace mathrec::latex

#include "mathrec/latex.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace mathrec::latex {

namespace {

const std::set<std::string>& command_set() {
  static const std::set<std::string> cmds = {
      // greek
      "\\alpha", "\\beta", "\\gamma", "\\delta", "\\epsilon", "\\theta",
      "\\lambda", "\\mu", "\\pi", "\\sigma", "\\phi", "\\psi", "\\omega",
      "\\Delta", "\\Sigma", "\\Pi",
      // structure
      "\\frac", "\\sqrt",
      // big operators and functions
      "\\sum", "\\int", "\\lim", "\\log", "\\sin", "\\cos", "\\tan",
      // relations and operators
      "\\leq", "\\geq", "\\neq", "\\pm", "\\times", "\\div", "\\cdot",
      "\\rightarrow", "\\infty", "\\ldots", "\\prime", "\\in", "\\exists",
      "\\forall",
      // escaped braces are literal symbols in CROHME ground truth
      "\\{", "\\}",
  };
  return cmds;
}

bool is_plain_symbol(char c) {
  if (std::isalnum(static_cast<unsigned char>(c))) return true;
  static const std::string singles = "+-=()[]|<>!,.'/:;?";
  return singles.find(c) != std::string::npos;
}

bool is_structural(char c) { return c == '^' || c == '_' || c == '{' || c == '}'; }

}  // namespace

const std::vector<std::string>& supported_commands() {
  static const std::vector<std::string> list(command_set().begin(), command_set().end());
  return list;
}

bool is_command(const Token& token) { return token.size() > 1 && token[0] == '\\'; }

std::string join(const TokenSeq& seq) {
  std::string out;
  for (size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += seq[i];
  }
  return out;
}

TokenSeq tokenize(const std::string& source) {
  TokenSeq tokens;
  int brace_depth = 0;
  size_t i = 0;
  const size_t n = source.size();
  while (i < n) {
    char c = source[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '\\') {
      size_t j = i + 1;
      while (j < n && std::isalpha(static_cast<unsigned char>(source[j]))) ++j;
      std::string cmd;
      if (j == i + 1) {
        // single escaped character, e.g. "\{"
        if (j >= n) fail("UnknownCommand", "dangling backslash at end of input");
        cmd = source.substr(i, 2);
        j = i + 2;
      } else {
        cmd = source.substr(i, j - i);
      }
      if (!command_set().count(cmd)) fail("UnknownCommand", "unsupported command '" + cmd + "'");
      tokens.push_back(cmd);
      i = j;
      continue;
    }
    if (c == '{') ++brace_depth;
    if (c == '}') {
      --brace_depth;
      if (brace_depth < 0) fail("UnbalancedBraces", "'}' without matching '{'");
    }
    if (is_structural(c) || is_plain_symbol(c)) {
      tokens.push_back(std::string(1, c));
      ++i;
      continue;
    }
    fail("UnknownCommand", std::string("unsupported character '") + c + "'");
  }
  if (brace_depth != 0) fail("UnbalancedBraces", "unclosed '{'");
  if (tokens.empty()) fail("EmptySequence", "expression has no tokens");
  return tokens;
}

Vocab Vocab::build(const std::vector<TokenSeq>& corpus) {
  if (corpus.empty()) fail("EmptyCorpus", "vocabulary needs at least one sequence");
  std::set<Token> distinct;
  for (const auto& seq : corpus) distinct.insert(seq.begin(), seq.end());
  if (distinct.empty()) fail("EmptyCorpus", "corpus contains no tokens");
  return from_classes(std::vector<Token>(distinct.begin(), distinct.end()));
}

Vocab Vocab::from_classes(std::vector<Token> classes) {
  Vocab v;
  v.classes_ = std::move(classes);
  v.rebuild_index();
  return v;
}

void Vocab::rebuild_index() {
  index_.clear();
  for (size_t i = 0; i < classes_.size(); ++i) {
    auto [it, inserted] = index_.emplace(classes_[i], static_cast<int>(i));
    if (!inserted) fail("EmptyCorpus", "duplicate class '" + classes_[i] + "'");
  }
}

int Vocab::encode(const Token& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) fail("OutOfVocab", "token '" + token + "' not in vocabulary");
  return it->second;
}

const Token& Vocab::lookup(int id) const {
  if (id < 0 || id >= num_classes())
    fail("IdOutOfRange", "id " + std::to_string(id) + " outside classes [0," +
                             std::to_string(num_classes()) + ")");
  return classes_[static_cast<size_t>(id)];
}

std::vector<int> Vocab::encode_ids(const TokenSeq& seq) const {
  std::vector<int> ids;
  ids.reserve(seq.size());
  for (const auto& t : seq) ids.push_back(encode(t));
  return ids;
}

TokenSeq Vocab::decode_ids(const std::vector<int>& ids) const {
  if (ids.empty()) fail("EmptySequence", "cannot decode an empty id list");
  TokenSeq seq;
  seq.reserve(ids.size());
  for (int id : ids) seq.push_back(lookup(id));
  return seq;
}

std::string Vocab::to_text() const {
  std::string out;
  for (const auto& c : classes_) out += c + "\n";
  out += "<sos>\n<eos>\n<pad>\n";
  return out;
}

Vocab Vocab::from_text(const std::string& text) {
  std::vector<Token> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.size() < 4 || lines[lines.size() - 3] != "<sos>" ||
      lines[lines.size() - 2] != "<eos>" || lines.back() != "<pad>")
    fail("CorruptRecord", "vocab file must end with <sos>, <eos>, <pad>");
  lines.resize(lines.size() - 3);
  return from_classes(std::move(lines));
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("IoFailure", "cannot open '" + path + "' for writing");
  out << to_text();
  if (!out) fail("IoFailure", "write failed for '" + path + "'");
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("IoFailure", "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

}  // namespace mathrec::latex

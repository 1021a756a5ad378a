#include "mathrec/posforest.hpp"

#include <cassert>

namespace mathrec::forest {

namespace {

using latex::TokenSeq;

// Recursive-descent parser over the token stream. `depth` counts enclosing
// substructure regions so DepthExceeded fires while parsing, not only while
// labeling.
class Parser {
 public:
  explicit Parser(const TokenSeq& seq) : toks_(seq) {}

  std::vector<ForestNode> parse() {
    auto nodes = parse_sequence(0);
    if (pos_ != toks_.size()) fail("UnbalancedBraces", "unexpected '}' at token " + std::to_string(pos_));
    return nodes;
  }

 private:
  const TokenSeq& toks_;
  size_t pos_ = 0;

  bool at_end() const { return pos_ >= toks_.size(); }
  const std::string& peek() const { return toks_[pos_]; }

  void check_depth(int depth) {
    if (depth > kMaxDepth)
      fail("DepthExceeded", "nesting depth exceeds " + std::to_string(kMaxDepth));
  }

  // Parses items until end of input or a closing '}' (left for the caller).
  std::vector<ForestNode> parse_sequence(int depth) {
    std::vector<ForestNode> nodes;
    while (!at_end() && peek() != "}") nodes.push_back(parse_item(depth));
    return nodes;
  }

  ForestNode parse_item(int depth) {
    ForestNode base = parse_base(depth);
    if (at_end() || (peek() != "^" && peek() != "_")) return base;

    ForestNode node;
    node.kind = ForestNode::Kind::SupSub;
    node.span_begin = base.span_begin;
    node.main_begin = base.span_begin;
    node.main_end = base.span_end;
    node.main.push_back(std::move(base));

    bool saw_sup = false, saw_sub = false;
    while (!at_end() && (peek() == "^" || peek() == "_")) {
      const bool sup = peek() == "^";
      if ((sup && saw_sup) || (!sup && saw_sub))
        fail("MalformedSuperscript", std::string("double '") + (sup ? "^" : "_") + "' on one base");
      (sup ? saw_sup : saw_sub) = true;
      const int region_begin = static_cast<int>(pos_);
      ++pos_;  // consume ^ or _
      check_depth(depth + 1);
      auto children = parse_script_argument(depth + 1, sup);
      const int region_end = static_cast<int>(pos_);
      if (sup) {
        node.upper_begin = region_begin;
        node.upper_end = region_end;
        node.upper = std::move(children);
      } else {
        node.lower_begin = region_begin;
        node.lower_end = region_end;
        node.lower = std::move(children);
      }
    }
    node.span_end = static_cast<int>(pos_);
    return node;
  }

  // A script argument is a single token or a braced group.
  std::vector<ForestNode> parse_script_argument(int depth, bool sup) {
    const char* kind = sup ? "superscript" : "subscript";
    if (at_end() || peek() == "}")
      fail("MalformedSuperscript", std::string("missing ") + kind + " argument");
    if (peek() == "{") {
      std::vector<ForestNode> nodes;
      parse_braced(depth, nodes);
      return nodes;
    }
    if (peek() == "^" || peek() == "_")
      fail("MalformedSuperscript", std::string("empty ") + kind + " argument");
    std::vector<ForestNode> nodes;
    nodes.push_back(parse_base(depth));
    return nodes;
  }

  // Consumes "{ ... }" and appends the interior items. Returns the group span.
  std::pair<int, int> parse_braced(int depth, std::vector<ForestNode>& out) {
    assert(peek() == "{");
    const int begin = static_cast<int>(pos_);
    ++pos_;
    out = parse_sequence(depth);
    if (at_end() || peek() != "}") fail("UnbalancedBraces", "missing '}'");
    ++pos_;
    return {begin, static_cast<int>(pos_)};
  }

  ForestNode parse_base(int depth) {
    if (at_end()) fail("MalformedSuperscript", "expected a token");
    const std::string& t = peek();
    if (t == "^" || t == "_")
      fail("MalformedSuperscript", "'" + t + "' has no base");
    if (t == "{") {
      ForestNode node;
      node.kind = ForestNode::Kind::Group;
      auto [b, e] = parse_braced(depth, node.main);
      node.span_begin = b;
      node.span_end = e;
      node.main_begin = b;
      node.main_end = e;
      return node;
    }
    if (t == "\\frac") return parse_fraction(depth);
    if (t == "\\sqrt") return parse_sqrt(depth);

    ForestNode node;
    node.kind = ForestNode::Kind::Atom;
    node.span_begin = static_cast<int>(pos_);
    node.span_end = static_cast<int>(pos_) + 1;
    ++pos_;
    return node;
  }

  ForestNode parse_fraction(int depth) {
    ForestNode node;
    node.kind = ForestNode::Kind::Fraction;
    node.span_begin = static_cast<int>(pos_);
    ++pos_;  // \frac
    check_depth(depth + 1);
    for (int part = 0; part < 2; ++part) {
      if (at_end() || peek() != "{")
        fail("MalformedFraction", "\\frac requires two braced groups");
      std::vector<ForestNode> children;
      auto [b, e] = parse_braced(depth + 1, children);
      if (part == 0) {
        node.upper_begin = b;
        node.upper_end = e;
        node.upper = std::move(children);
      } else {
        node.lower_begin = b;
        node.lower_end = e;
        node.lower = std::move(children);
      }
    }
    node.span_end = static_cast<int>(pos_);
    return node;
  }

  ForestNode parse_sqrt(int depth) {
    ForestNode node;
    node.kind = ForestNode::Kind::Sqrt;
    node.span_begin = static_cast<int>(pos_);
    ++pos_;  // \sqrt
    check_depth(depth + 1);
    if (!at_end() && peek() == "[") {
      const int b = static_cast<int>(pos_);
      ++pos_;
      node.upper = parse_index_sequence(depth + 1);
      if (at_end() || peek() != "]") fail("MalformedSqrt", "missing ']' after \\sqrt index");
      ++pos_;
      node.upper_begin = b;
      node.upper_end = static_cast<int>(pos_);
    }
    if (at_end()) fail("MalformedSqrt", "\\sqrt has no radicand");
    if (peek() == "{") {
      std::vector<ForestNode> children;
      auto [b, e] = parse_braced(depth + 1, children);
      node.main_begin = b;
      node.main_end = e;
      node.main = std::move(children);
    } else {
      node.main.push_back(parse_base(depth + 1));
      node.main_begin = node.main.back().span_begin;
      node.main_end = node.main.back().span_end;
    }
    node.span_end = static_cast<int>(pos_);
    return node;
  }

  // Index of \sqrt[n]: items until the closing ']'.
  std::vector<ForestNode> parse_index_sequence(int depth) {
    std::vector<ForestNode> nodes;
    while (!at_end() && peek() != "]") nodes.push_back(parse_item(depth));
    return nodes;
  }
};

class Labeler {
 public:
  Labeler(int T) : depth_(T, -1), relpos_(T, RelPos::Middle) {}

  void label(const std::vector<ForestNode>& nodes, int depth, RelPos rp) {
    check(depth);
    for (const auto& node : nodes) label_node(node, depth, rp);
  }

  PositionLabelSeq take() {
    for (size_t i = 0; i < depth_.size(); ++i)
      if (depth_[i] < 0)
        fail("MalformedSuperscript", "token " + std::to_string(i) + " left unlabeled");
    return PositionLabelSeq{std::move(depth_), std::move(relpos_)};
  }

 private:
  std::vector<int> depth_;
  std::vector<RelPos> relpos_;

  void check(int depth) {
    if (depth > kMaxDepth)
      fail("DepthExceeded", "nesting depth exceeds " + std::to_string(kMaxDepth));
  }

  void fill(int begin, int end, int depth, RelPos rp) {
    check(depth);
    for (int i = begin; i < end; ++i) {
      depth_[static_cast<size_t>(i)] = depth;
      relpos_[static_cast<size_t>(i)] = rp;
    }
  }

  // Fill the region (delimiters included), then let children overwrite their
  // own nested sub-regions.
  void region(int begin, int end, const std::vector<ForestNode>& children, int depth, RelPos rp) {
    if (begin < 0) return;
    fill(begin, end, depth, rp);
    label(children, depth, rp);
  }

  void label_node(const ForestNode& node, int depth, RelPos rp) {
    switch (node.kind) {
      case ForestNode::Kind::Atom:
        fill(node.span_begin, node.span_end, depth, rp);
        break;
      case ForestNode::Kind::Group:
        fill(node.span_begin, node.span_end, depth, rp);
        label(node.main, depth, rp);
        break;
      case ForestNode::Kind::SupSub:
        label(node.main, depth, rp);
        region(node.upper_begin, node.upper_end, node.upper, depth + 1, RelPos::Upper);
        region(node.lower_begin, node.lower_end, node.lower, depth + 1, RelPos::Lower);
        break;
      case ForestNode::Kind::Fraction:
        fill(node.span_begin, node.span_begin + 1, depth, rp);
        region(node.upper_begin, node.upper_end, node.upper, depth + 1, RelPos::Upper);
        region(node.lower_begin, node.lower_end, node.lower, depth + 1, RelPos::Lower);
        break;
      case ForestNode::Kind::Sqrt:
        fill(node.span_begin, node.span_begin + 1, depth, rp);
        region(node.upper_begin, node.upper_end, node.upper, depth + 1, RelPos::Upper);
        region(node.main_begin, node.main_end, node.main, depth + 1, RelPos::Middle);
        break;
    }
  }
};

}  // namespace

const char* to_string(RelPos p) {
  switch (p) {
    case RelPos::Middle: return "middle";
    case RelPos::Upper: return "upper";
    case RelPos::Lower: return "lower";
  }
  return "middle";
}

RelPos relpos_from_string(const std::string& s) {
  if (s == "middle") return RelPos::Middle;
  if (s == "upper") return RelPos::Upper;
  if (s == "lower") return RelPos::Lower;
  fail("CorruptRecord", "unknown relative position '" + s + "'");
}

std::vector<ForestNode> parse_forest(const latex::TokenSeq& seq) {
  if (seq.empty()) fail("EmptySequence", "cannot parse an empty sequence");
  return Parser(seq).parse();
}

PositionLabelSeq assign_labels(const std::vector<ForestNode>& forest, int T) {
  Labeler labeler(T);
  labeler.label(forest, 0, RelPos::Middle);
  return labeler.take();
}

PositionLabelSeq encode_position_labels(const latex::TokenSeq& seq) {
  return assign_labels(parse_forest(seq), static_cast<int>(seq.size()));
}

}  // namespace mathrec::forest

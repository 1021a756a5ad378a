#pragma once

#include <string>
#include <vector>

#include "mathrec/latex.hpp"

namespace mathrec::forest {

// Relative position of a token within its innermost substructure.
enum class RelPos { Middle = 0, Upper = 1, Lower = 2 };

// Hard cap on nesting depth; deeper expressions are rejected.
constexpr int kMaxDepth = 8;
constexpr int kNumRelPos = 3;

const char* to_string(RelPos p);
RelPos relpos_from_string(const std::string& s);

// One tree of the position forest. The main part of a substructure is the
// root, the upper part the left child list, the lower part the right child
// list. Sibling spans are disjoint and ordered; delimiter tokens (^ _ { })
// fall inside their region's span but outside any child span.
struct ForestNode {
  enum class Kind { Atom, SupSub, Fraction, Sqrt, Group };

  Kind kind = Kind::Atom;
  std::vector<ForestNode> main;
  std::vector<ForestNode> upper;
  std::vector<ForestNode> lower;

  // [begin, end) into the token sequence.
  int span_begin = 0;
  int span_end = 0;

  // Delimiter-inclusive region spans; -1 when the region is absent.
  // SupSub: upper = superscript, lower = subscript.
  // Fraction: upper = numerator group, lower = denominator group.
  // Sqrt: upper = optional [index], main_* = radicand.
  int upper_begin = -1, upper_end = -1;
  int lower_begin = -1, lower_end = -1;
  int main_begin = -1, main_end = -1;
};

// Per-token nesting depth (0..kMaxDepth) and relative position, both length T.
struct PositionLabelSeq {
  std::vector<int> depth;
  std::vector<RelPos> relpos;

  bool operator==(const PositionLabelSeq&) const = default;
};

/// Parse a token sequence into the position forest.
/// Errors: MalformedSuperscript, MalformedFraction, MalformedSqrt,
/// UnbalancedBraces, DepthExceeded.
std::vector<ForestNode> parse_forest(const latex::TokenSeq& seq);

/// Walk a forest and label every token index in [0, T).
PositionLabelSeq assign_labels(const std::vector<ForestNode>& forest, int T);

/// parse_forest then assign_labels.
PositionLabelSeq encode_position_labels(const latex::TokenSeq& seq);

}  // namespace mathrec::forest

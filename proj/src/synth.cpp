#include "mathrec/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>

#include "mathrec/posforest.hpp"

namespace mathrec::data {

namespace {

// ---------------------------------------------------------------------------
// Grammar
// ---------------------------------------------------------------------------

const std::vector<std::string>& atom_pool() {
  static const std::vector<std::string> atoms = {
      "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
      "a", "b", "c", "d", "n", "x", "y", "z",
      "\\alpha", "\\beta", "\\pi"};
  return atoms;
}

const std::vector<std::string>& op_pool() {
  static const std::vector<std::string> ops = {"+", "-", "=", "\\times"};
  return ops;
}

// Portable uniform [0,1) double; avoids distribution implementation drift.
struct Rng {
  std::mt19937_64 engine;
  explicit Rng(std::uint64_t seed) : engine(seed) {}
  double uniform() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }
  int index(int n) { return static_cast<int>(uniform() * n) % n; }
};

void gen_expr(Rng& rng, int budget, latex::TokenSeq& out);

void gen_element(Rng& rng, int budget, latex::TokenSeq& out) {
  // Element weights: atom .60, sup/sub .10, \frac .10, \sqrt .05,
  // re-normalized to the categories the depth budget still allows.
  double w_atom = 0.60, w_script = 0.10, w_frac = 0.10, w_sqrt = 0.05;
  if (budget <= 0) w_script = w_frac = w_sqrt = 0.0;
  const double total = w_atom + w_script + w_frac + w_sqrt;
  double u = rng.uniform() * total;

  const auto braced = [&](int inner_budget) {
    out.push_back("{");
    gen_expr(rng, inner_budget, out);
    out.push_back("}");
  };

  if ((u -= w_atom) < 0.0) {
    out.push_back(atom_pool()[static_cast<size_t>(rng.index(static_cast<int>(atom_pool().size())))]);
    return;
  }
  if ((u -= w_script) < 0.0) {
    out.push_back(atom_pool()[static_cast<size_t>(rng.index(static_cast<int>(atom_pool().size())))]);
    const double v = rng.uniform();
    if (v < 0.45) {
      out.push_back("^");
      braced(budget - 1);
    } else if (v < 0.90) {
      out.push_back("_");
      braced(budget - 1);
    } else {
      out.push_back("^");
      braced(budget - 1);
      out.push_back("_");
      braced(budget - 1);
    }
    return;
  }
  if ((u -= w_frac) < 0.0) {
    out.push_back("\\frac");
    braced(budget - 1);
    braced(budget - 1);
    return;
  }
  out.push_back("\\sqrt");
  braced(budget - 1);
}

void gen_expr(Rng& rng, int budget, latex::TokenSeq& out) {
  gen_element(rng, budget, out);
  // Binary operator extension with weight .15 per element.
  while (rng.uniform() < 0.15) {
    out.push_back(op_pool()[static_cast<size_t>(rng.index(static_cast<int>(op_pool().size())))]);
    gen_element(rng, budget, out);
  }
}

// ---------------------------------------------------------------------------
// Bitmap font
// ---------------------------------------------------------------------------

using Glyph = std::array<const char*, 7>;

const std::map<std::string, Glyph>& font() {
  static const std::map<std::string, Glyph> glyphs = {
      {"0", {"01110", "10001", "10011", "10101", "11001", "10001", "01110"}},
      {"1", {"00100", "01100", "00100", "00100", "00100", "00100", "01110"}},
      {"2", {"01110", "10001", "00001", "00010", "00100", "01000", "11111"}},
      {"3", {"11110", "00001", "00001", "01110", "00001", "00001", "11110"}},
      {"4", {"00010", "00110", "01010", "10010", "11111", "00010", "00010"}},
      {"5", {"11111", "10000", "11110", "00001", "00001", "10001", "01110"}},
      {"6", {"00110", "01000", "10000", "11110", "10001", "10001", "01110"}},
      {"7", {"11111", "00001", "00010", "00100", "01000", "01000", "01000"}},
      {"8", {"01110", "10001", "10001", "01110", "10001", "10001", "01110"}},
      {"9", {"01110", "10001", "10001", "01111", "00001", "00010", "01100"}},
      {"a", {"00000", "00000", "01110", "00001", "01111", "10001", "01111"}},
      {"b", {"10000", "10000", "11110", "10001", "10001", "10001", "11110"}},
      {"c", {"00000", "00000", "01110", "10001", "10000", "10001", "01110"}},
      {"d", {"00001", "00001", "01111", "10001", "10001", "10001", "01111"}},
      {"n", {"00000", "00000", "10110", "11001", "10001", "10001", "10001"}},
      {"x", {"00000", "00000", "10001", "01010", "00100", "01010", "10001"}},
      {"y", {"00000", "00000", "10001", "10001", "01111", "00001", "01110"}},
      {"z", {"00000", "00000", "11111", "00010", "00100", "01000", "11111"}},
      {"\\alpha", {"00000", "00000", "01101", "10010", "10010", "10010", "01101"}},
      {"\\beta", {"01110", "10001", "11110", "10001", "10001", "11110", "10000"}},
      {"\\pi", {"00000", "00000", "11111", "01010", "01010", "01010", "01001"}},
      {"+", {"00000", "00100", "00100", "11111", "00100", "00100", "00000"}},
      {"-", {"00000", "00000", "00000", "11111", "00000", "00000", "00000"}},
      {"=", {"00000", "00000", "11111", "00000", "11111", "00000", "00000"}},
      {"\\times", {"00000", "10001", "01010", "00100", "01010", "10001", "00000"}},
  };
  return glyphs;
}

// ---------------------------------------------------------------------------
// Box layout
// ---------------------------------------------------------------------------

struct Box {
  int w = 0, h = 0;
  int mid = 0;  // row of the vertical alignment axis
  std::vector<float> px;

  Box() = default;
  Box(int height, int width, int mid_row)
      : w(width), h(height), mid(mid_row), px(static_cast<size_t>(height) * width, 0.0f) {}

  bool empty() const { return w == 0 || h == 0; }
  float& at(int r, int c) { return px[static_cast<size_t>(r) * w + c]; }
  float at(int r, int c) const { return px[static_cast<size_t>(r) * w + c]; }

  void paste(const Box& src, int row, int col) {
    for (int r = 0; r < src.h; ++r)
      for (int c = 0; c < src.w; ++c)
        if (src.at(r, c) > 0.0f) at(row + r, col + c) = src.at(r, c);
  }
};

int scale_for_depth(int depth) { return depth == 0 ? 2 : 1; }

Box glyph_box(const std::string& token, int scale) {
  auto it = font().find(token);
  if (it == font().end()) {
    // Unknown printable symbol: a filled block keeps rendering total.
    Box box(7 * scale, 5 * scale, 7 * scale / 2);
    for (auto& v : box.px) v = 1.0f;
    return box;
  }
  Box box(7 * scale, 5 * scale, 7 * scale / 2);
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 5; ++c)
      if (it->second[static_cast<size_t>(r)][c] == '1')
        for (int dr = 0; dr < scale; ++dr)
          for (int dc = 0; dc < scale; ++dc) box.at(r * scale + dr, c * scale + dc) = 1.0f;
  return box;
}

Box hcat(const std::vector<Box>& parts, int gap) {
  int top = 0, bottom = 0, width = 0;
  bool first = true;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    top = std::max(top, p.mid);
    bottom = std::max(bottom, p.h - p.mid);
    width += (first ? 0 : gap) + p.w;
    first = false;
  }
  if (first) return Box();
  Box out(top + bottom, width, top);
  int x = 0;
  first = true;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (!first) x += gap;
    out.paste(p, top - p.mid, x);
    x += p.w;
    first = false;
  }
  return out;
}

Box layout_nodes(const std::vector<forest::ForestNode>& nodes, const latex::TokenSeq& toks,
                 int depth);

Box layout_supsub(const forest::ForestNode& node, const latex::TokenSeq& toks, int depth) {
  Box base = layout_nodes(node.main, toks, depth);
  Box sup = layout_nodes(node.upper, toks, depth + 1);
  Box sub = layout_nodes(node.lower, toks, depth + 1);
  if (sup.empty() && sub.empty()) return base;

  // Axis coordinates: rows relative to the base midline. The superscript's
  // bottom sits 1px above the midline, the subscript's top 2px below.
  const int sup_top = sup.empty() ? 0 : -1 - sup.h;
  const int sub_bottom = sub.empty() ? 0 : 2 + sub.h;
  const int top = std::max(base.mid, -sup_top);
  const int bottom = std::max(base.h - base.mid, sub_bottom);
  const int gap = 1;
  Box out(top + bottom, base.w + gap + std::max(sup.w, sub.w), top);
  out.paste(base, top - base.mid, 0);
  if (!sup.empty()) out.paste(sup, top + sup_top, base.w + gap);
  if (!sub.empty()) out.paste(sub, top + 2, base.w + gap);
  return out;
}

Box layout_fraction(const forest::ForestNode& node, const latex::TokenSeq& toks, int depth) {
  Box num = layout_nodes(node.upper, toks, depth + 1);
  Box den = layout_nodes(node.lower, toks, depth + 1);
  const int s = scale_for_depth(depth);
  const int pad = 2 * s;
  const int bar_t = s;
  const int width = std::max(num.w, den.w) + pad;
  const int bar_top_axis = -(bar_t + 1) / 2;  // bar straddles the axis
  const int num_top = bar_top_axis - 1 - num.h;
  const int den_bottom = bar_top_axis + bar_t + 1 + den.h;
  const int top = -num_top;
  Box out(top + den_bottom, width, top);
  for (int r = 0; r < bar_t; ++r)
    for (int c = 0; c < width; ++c) out.at(top + bar_top_axis + r, c) = 1.0f;
  if (!num.empty()) out.paste(num, 0, (width - num.w) / 2);
  if (!den.empty()) out.paste(den, top + bar_top_axis + bar_t + 1, (width - den.w) / 2);
  return out;
}

Box layout_sqrt(const forest::ForestNode& node, const latex::TokenSeq& toks, int depth) {
  Box rad = layout_nodes(node.main, toks, depth + 1);
  if (rad.empty()) rad = Box(1, 1, 0);
  const int s = scale_for_depth(depth);
  const int bar_t = s;
  const int hook_w = 3 * s;
  const int h = bar_t + 1 + rad.h;
  Box out(h, hook_w + rad.w + s, bar_t + 1 + rad.mid);
  // overline
  for (int r = 0; r < bar_t; ++r)
    for (int c = hook_w - 1; c < out.w; ++c) out.at(r, c) = 1.0f;
  // down stroke of the radical hook
  for (int r = 0; r < h; ++r) {
    const int c = hook_w - 1 - (r * hook_w) / h;
    out.at(r, std::clamp(c, 0, hook_w - 1)) = 1.0f;
  }
  out.paste(rad, bar_t + 1, hook_w);
  if (!node.upper.empty()) {
    Box idx = layout_nodes(node.upper, toks, depth + 1);
    idx.mid = idx.h + 2 * s;  // raise the index above the hook
    return hcat({idx, out}, 0);
  }
  return out;
}

Box layout_node(const forest::ForestNode& node, const latex::TokenSeq& toks, int depth) {
  using Kind = forest::ForestNode::Kind;
  switch (node.kind) {
    case Kind::Atom: return glyph_box(toks[static_cast<size_t>(node.span_begin)], scale_for_depth(depth));
    case Kind::Group: return layout_nodes(node.main, toks, depth);
    case Kind::SupSub: return layout_supsub(node, toks, depth);
    case Kind::Fraction: return layout_fraction(node, toks, depth);
    case Kind::Sqrt: return layout_sqrt(node, toks, depth);
  }
  return Box();
}

Box layout_nodes(const std::vector<forest::ForestNode>& nodes, const latex::TokenSeq& toks,
                 int depth) {
  std::vector<Box> parts;
  parts.reserve(nodes.size());
  for (const auto& n : nodes) parts.push_back(layout_node(n, toks, depth));
  return hcat(parts, scale_for_depth(depth));
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

latex::TokenSeq synth_expression(std::uint64_t seed, int max_depth) {
  Rng rng(mix_seed(seed, 0));
  latex::TokenSeq out;
  gen_expr(rng, max_depth, out);
  return out;
}

const std::vector<std::string>& grammar_terminals() {
  static const std::vector<std::string> terminals = [] {
    std::vector<std::string> t = atom_pool();
    t.insert(t.end(), op_pool().begin(), op_pool().end());
    t.insert(t.end(), {"^", "_", "{", "}", "\\frac", "\\sqrt"});
    std::sort(t.begin(), t.end());
    return t;
  }();
  return terminals;
}

latex::Vocab grammar_vocab() { return latex::Vocab::from_classes(grammar_terminals()); }

Image render_synthetic(const latex::TokenSeq& seq) {
  const auto forest = forest::parse_forest(seq);
  Box content = layout_nodes(forest, seq, 0);
  if (content.empty()) content = Box(1, 1, 0);

  const int margin = 2;
  const int usable_h = kRenderHeight - 2 * margin;
  if (content.h > usable_h) {
    // Nearest-neighbour downscale to fit the fixed canvas height.
    const double k = static_cast<double>(usable_h) / content.h;
    const int nw = std::max(1, static_cast<int>(std::lround(content.w * k)));
    Box shrunk(usable_h, nw, 0);
    for (int r = 0; r < usable_h; ++r)
      for (int c = 0; c < nw; ++c)
        shrunk.at(r, c) = content.at(std::min(content.h - 1, static_cast<int>(r / k)),
                                     std::min(content.w - 1, static_cast<int>(c / k)));
    content = std::move(shrunk);
  }

  Image img(kRenderHeight, content.w + 2 * margin);
  const int row0 = (kRenderHeight - content.h) / 2;
  for (int r = 0; r < content.h; ++r)
    for (int c = 0; c < content.w; ++c)
      if (content.at(r, c) > 0.0f) img.at(row0 + r, margin + c) = content.at(r, c);
  return img;
}

}  // namespace mathrec::data

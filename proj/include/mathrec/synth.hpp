#pragma once

#include <cstdint>

#include "mathrec/image.hpp"
#include "mathrec/latex.hpp"

namespace mathrec::data {

/// Deterministic random expression from a fixed stochastic grammar over
/// atoms, binary operators, scripts, fractions and square roots. Nesting is
/// bounded by max_depth. Total: every output tokenizes and parses.
latex::TokenSeq synth_expression(std::uint64_t seed, int max_depth);

/// All terminal tokens the grammar can emit, sorted.
const std::vector<std::string>& grammar_terminals();

/// Vocabulary over the grammar terminals (stable across corpora).
latex::Vocab grammar_vocab();

/// Typeset a token sequence with the built-in 5x7 bitmap font. Glyphs are
/// scaled x2 at depth 0 and x1 deeper; superscripts raise, subscripts lower,
/// fractions stack around a bar. Output height is fixed at 64 pixels.
Image render_synthetic(const latex::TokenSeq& seq);

constexpr int kRenderHeight = 64;

/// splitmix64; used to derive per-sample seeds from a corpus seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace mathrec::data

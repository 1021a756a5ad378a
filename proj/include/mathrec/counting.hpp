#pragma once

#include <vector>

#include "mathrec/latex.hpp"

namespace mathrec::counting {

// Per-class symbol counts over the vocabulary classes (reserved ids excluded).
// Ground truth entries are integers; model predictions are non-negative reals.
using CountVector = std::vector<double>;

/// counts[c] = multiplicity of class c in seq. Errors: OutOfVocab.
CountVector count_vector(const latex::TokenSeq& seq, const latex::Vocab& vocab);

/// Mean over classes of the smooth-L1 residual penalty: 0.5 d^2 for |d| < 1,
/// |d| - 0.5 otherwise. Errors: LengthMismatch.
double smooth_l1(const CountVector& pred, const CountVector& target);

}  // namespace mathrec::counting

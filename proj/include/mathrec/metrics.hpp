#pragma once

#include <string>
#include <vector>

#include "mathrec/latex.hpp"

namespace mathrec::metrics {

struct MetricsReport {
  double exprate = 0.0;  // percentages in [0, 100]
  double le1 = 0.0;
  double le2 = 0.0;
  double le3 = 0.0;
  int n_samples = 0;
  std::vector<int> distances;  // per-sample edit distances
};

/// Token-level Levenshtein distance (insertions + deletions + substitutions).
int edit_distance(const latex::TokenSeq& pred, const latex::TokenSeq& truth);

/// Expression rates tolerating 0..3 symbol-level errors.
/// Errors: PairCountMismatch, EmptyEvaluation.
MetricsReport evaluate(const std::vector<latex::TokenSeq>& predictions,
                       const std::vector<latex::TokenSeq>& truths);

/// Fixed-order text table: ExpRate, <=1, <=2, <=3, N.
std::string format_report(const MetricsReport& report);

}  // namespace mathrec::metrics

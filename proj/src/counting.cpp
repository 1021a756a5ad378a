#include "mathrec/counting.hpp"

#include <cmath>
#include <string>

namespace mathrec::counting {

CountVector count_vector(const latex::TokenSeq& seq, const latex::Vocab& vocab) {
  CountVector counts(static_cast<size_t>(vocab.num_classes()), 0.0);
  for (const auto& token : seq) counts[static_cast<size_t>(vocab.encode(token))] += 1.0;
  return counts;
}

double smooth_l1(const CountVector& pred, const CountVector& target) {
  if (pred.size() != target.size())
    fail("LengthMismatch", "pred has " + std::to_string(pred.size()) + " classes, target " +
                               std::to_string(target.size()));
  if (pred.empty()) fail("LengthMismatch", "count vectors are empty");
  double total = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = std::abs(pred[i] - target[i]);
    total += d < 1.0 ? 0.5 * d * d : d - 0.5;
  }
  return total / static_cast<double>(pred.size());
}

}  // namespace mathrec::counting

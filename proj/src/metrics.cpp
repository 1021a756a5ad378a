#include "mathrec/metrics.hpp"

#include <algorithm>
#include <cstdio>

namespace mathrec::metrics {

int edit_distance(const latex::TokenSeq& pred, const latex::TokenSeq& truth) {
  const size_t n = pred.size(), m = truth.size();
  if (n == 0) return static_cast<int>(m);
  if (m == 0) return static_cast<int>(n);
  // Two-row DP over the truth dimension.
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (pred[i - 1] == truth[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

MetricsReport evaluate(const std::vector<latex::TokenSeq>& predictions,
                       const std::vector<latex::TokenSeq>& truths) {
  if (predictions.size() != truths.size())
    fail("PairCountMismatch", std::to_string(predictions.size()) + " predictions vs " +
                                  std::to_string(truths.size()) + " truths");
  if (predictions.empty()) fail("EmptyEvaluation", "no prediction/truth pairs");

  MetricsReport report;
  report.n_samples = static_cast<int>(predictions.size());
  report.distances.reserve(predictions.size());
  int hits[4] = {0, 0, 0, 0};
  for (size_t i = 0; i < predictions.size(); ++i) {
    const int d = edit_distance(predictions[i], truths[i]);
    report.distances.push_back(d);
    for (int k = 0; k < 4; ++k)
      if (d <= k) ++hits[k];
  }
  const double denom = static_cast<double>(report.n_samples);
  report.exprate = 100.0 * hits[0] / denom;
  report.le1 = 100.0 * hits[1] / denom;
  report.le2 = 100.0 * hits[2] / denom;
  report.le3 = 100.0 * hits[3] / denom;
  return report;
}

std::string format_report(const MetricsReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "ExpRate %6.2f\n<=1     %6.2f\n<=2     %6.2f\n<=3     %6.2f\nN       %6d\n",
                report.exprate, report.le1, report.le2, report.le3, report.n_samples);
  return buf;
}

}  // namespace mathrec::metrics

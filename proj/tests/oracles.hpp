// Independent reference implementations the tests compare against. Each is
// deliberately written in a different style from the library code: the
// labeler works over flat token indices with no forest, the edit distance
// keeps the full DP matrix, counting uses an ordered map.
#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "mathrec/latex.hpp"

namespace oracles {

struct FlatLabels {
  std::vector<int> depth;
  std::vector<int> relpos;  // 0 middle, 1 upper, 2 lower
};

class FlatLabeler {
 public:
  explicit FlatLabeler(const mathrec::latex::TokenSeq& toks)
      : t_(toks), out_{std::vector<int>(toks.size(), -1), std::vector<int>(toks.size(), 0)} {}

  FlatLabels run() {
    seq(0, static_cast<int>(t_.size()), 0, 0);
    return out_;
  }

 private:
  const mathrec::latex::TokenSeq& t_;
  FlatLabels out_;

  void set(int i, int d, int rp) {
    out_.depth[static_cast<size_t>(i)] = d;
    out_.relpos[static_cast<size_t>(i)] = rp;
  }

  void fill(int lo, int hi, int d, int rp) {
    for (int i = lo; i < hi; ++i) set(i, d, rp);
  }

  int match(int i, const char* open, const char* close) const {
    int level = 0;
    for (int j = i; j < static_cast<int>(t_.size()); ++j) {
      if (t_[static_cast<size_t>(j)] == open) ++level;
      else if (t_[static_cast<size_t>(j)] == close && --level == 0) return j;
    }
    return -1;
  }

  void seq(int lo, int hi, int d, int rp) {
    int i = lo;
    while (i < hi) i = item(i, hi, d, rp);
  }

  int base(int i, int hi, int d, int rp) {
    const std::string& tok = t_[static_cast<size_t>(i)];
    if (tok == "{") {
      int j = match(i, "{", "}");
      fill(i, j + 1, d, rp);
      seq(i + 1, j, d, rp);
      return j + 1;
    }
    if (tok == "\\frac") {
      set(i, d, rp);
      int j1 = match(i + 1, "{", "}");
      fill(i + 1, j1 + 1, d + 1, 1);
      seq(i + 2, j1, d + 1, 1);
      int j2 = match(j1 + 1, "{", "}");
      fill(j1 + 1, j2 + 1, d + 1, 2);
      seq(j1 + 2, j2, d + 1, 2);
      return j2 + 1;
    }
    if (tok == "\\sqrt") {
      set(i, d, rp);
      int k = i + 1;
      if (k < hi && t_[static_cast<size_t>(k)] == "[") {
        int j = match(k, "[", "]");
        fill(k, j + 1, d + 1, 1);
        seq(k + 1, j, d + 1, 1);
        k = j + 1;
      }
      if (t_[static_cast<size_t>(k)] == "{") {
        int j = match(k, "{", "}");
        fill(k, j + 1, d + 1, 0);
        seq(k + 1, j, d + 1, 0);
        return j + 1;
      }
      return base(k, hi, d + 1, 0);
    }
    set(i, d, rp);
    return i + 1;
  }

  int item(int i, int hi, int d, int rp) {
    int e = base(i, hi, d, rp);
    while (e < hi && (t_[static_cast<size_t>(e)] == "^" || t_[static_cast<size_t>(e)] == "_")) {
      const int rp2 = t_[static_cast<size_t>(e)] == "^" ? 1 : 2;
      set(e, d + 1, rp2);
      if (e + 1 < hi && t_[static_cast<size_t>(e + 1)] == "{") {
        int j = match(e + 1, "{", "}");
        fill(e + 1, j + 1, d + 1, rp2);
        seq(e + 2, j, d + 1, rp2);
        e = j + 1;
      } else {
        e = base(e + 1, hi, d + 1, rp2);
      }
    }
    return e;
  }
};

inline FlatLabels flat_labels(const mathrec::latex::TokenSeq& toks) {
  return FlatLabeler(toks).run();
}

inline int full_matrix_edit_distance(const mathrec::latex::TokenSeq& a,
                                     const mathrec::latex::TokenSeq& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
  for (size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[n][m];
}

inline std::map<std::string, int> map_tally(const mathrec::latex::TokenSeq& seq) {
  std::map<std::string, int> counts;
  for (const auto& t : seq) ++counts[t];
  return counts;
}

template <typename T>
std::vector<T> naive_matmul(const std::vector<T>& a, const std::vector<T>& b, int n, int k,
                            int m) {
  std::vector<T> c(static_cast<size_t>(n) * m, T(0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      for (int p = 0; p < k; ++p)
        c[static_cast<size_t>(i) * m + j] +=
            a[static_cast<size_t>(i) * k + p] * b[static_cast<size_t>(p) * m + j];
  return c;
}

}  // namespace oracles

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mathrec/error.hpp"

namespace mathrec::tensor {

// Dense tensors with reverse-mode autodiff. The graph is an eager tape:
// every op allocates a node holding values, parent links and a backward
// closure. backward() runs a topological sweep and folds per-pass adjoints
// into each node's persistent grad, so repeated calls accumulate.
//
// There is no general broadcasting. Scalar ops and the explicit axis ops
// (add_axis, mul_axis) are the only shape-expanding primitives.

using Shape = std::vector<int>;

inline size_t shape_size(const Shape& s) {
  size_t n = 1;
  for (int d : s) n *= static_cast<size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

[[noreturn]] inline void shape_fail(const char* op, const Shape& a, const Shape& b) {
  fail("ShapeMismatch", std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
}

/// Portable uniform double in [0, 1); avoids libstdc++ distribution drift.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
struct NodeT {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;     // persistent, accumulated across backward() calls
  std::vector<T> adjoint;  // scratch for one backward pass
  std::vector<std::shared_ptr<NodeT>> parents;
  std::function<void(NodeT&)> backward_fn;  // reads adjoint, += into parents'

  size_t size() const { return values.size(); }
};

template <typename T = float>
class TensorT {
 public:
  using Node = NodeT<T>;

  TensorT() = default;
  explicit TensorT(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static TensorT zeros(Shape shape) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->values.assign(shape_size(n->shape), T(0));
    return TensorT(std::move(n));
  }

  static TensorT full(Shape shape, T v) {
    auto t = zeros(std::move(shape));
    std::fill(t.node_->values.begin(), t.node_->values.end(), v);
    return t;
  }

  static TensorT from(Shape shape, std::vector<T> values) {
    if (values.size() != shape_size(shape))
      fail("ShapeMismatch", "from: " + shape_str(shape) + " needs " +
                                std::to_string(shape_size(shape)) + " values, got " +
                                std::to_string(values.size()));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    return TensorT(std::move(n));
  }

  /// Xavier-uniform weight init in +/- sqrt(6 / (fan_in + fan_out)).
  static TensorT xavier(Shape shape, int fan_in, int fan_out, std::mt19937_64& rng) {
    auto t = zeros(std::move(shape));
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : t.node_->values)
      v = static_cast<T>((uniform01(rng) * 2.0 - 1.0) * bound);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  size_t size() const { return node_->size(); }

  std::vector<T>& values() { return node_->values; }
  const std::vector<T>& values() const { return node_->values; }
  std::vector<T>& grad() { return node_->grad; }
  const std::vector<T>& grad() const { return node_->grad; }

  void zero_grad() { node_->grad.assign(node_->size(), T(0)); }

  T item() const {
    if (node_->size() != 1)
      fail("NonScalarLoss", "item() on tensor of shape " + shape_str(node_->shape));
    return node_->values[0];
  }

  const std::shared_ptr<Node>& node() const { return node_; }

  /// Reverse-mode sweep from a scalar. Grads of every reachable node gain
  /// this pass's contribution; repeated calls accumulate.
  void backward() const {
    if (node_->size() != 1)
      fail("NonScalarLoss", "backward() on tensor of shape " + shape_str(node_->shape));
    // Iterative postorder DFS; reverse postorder is a topological order.
    std::vector<Node*> order;
    std::unordered_map<Node*, int> state;  // 0 new, 1 expanded
    std::vector<Node*> stack = {node_.get()};
    while (!stack.empty()) {
      Node* n = stack.back();
      auto& st = state[n];
      if (st == 0) {
        st = 1;
        for (auto& p : n->parents)
          if (state.find(p.get()) == state.end()) stack.push_back(p.get());
      } else {
        stack.pop_back();
        if (st == 1) {
          st = 2;
          order.push_back(n);
        }
      }
    }
    for (Node* n : order) n->adjoint.assign(n->size(), T(0));
    node_->adjoint[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if ((*it)->backward_fn) (*it)->backward_fn(**it);
    for (Node* n : order) {
      if (n->grad.size() != n->size()) n->grad.assign(n->size(), T(0));
      for (size_t i = 0; i < n->size(); ++i) n->grad[i] += n->adjoint[i];
      n->adjoint.clear();
      n->adjoint.shrink_to_fit();
    }
  }

 private:
  std::shared_ptr<Node> node_;
};

namespace detail {

template <typename T>
std::shared_ptr<NodeT<T>> make_node(Shape shape, std::vector<std::shared_ptr<NodeT<T>>> parents) {
  auto n = std::make_shared<NodeT<T>>();
  n->shape = std::move(shape);
  n->values.assign(shape_size(n->shape), T(0));
  n->parents = std::move(parents);
  return n;
}

// Group iteration along one axis: element index = (o * n + k) * inner + i.
struct AxisSpan {
  size_t outer, n, inner;
};

inline AxisSpan axis_span(const Shape& shape, int axis) {
  if (axis < 0 || axis >= static_cast<int>(shape.size()))
    fail("ShapeMismatch", "axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  AxisSpan s{1, static_cast<size_t>(shape[static_cast<size_t>(axis)]), 1};
  for (int i = 0; i < axis; ++i) s.outer *= static_cast<size_t>(shape[static_cast<size_t>(i)]);
  for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i)
    s.inner *= static_cast<size_t>(shape[i]);
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and scalar ops
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape() != b.shape()) shape_fail("add", a.shape(), b.shape());
  auto n = detail::make_node<T>(a.shape(), {a.node(), b.node()});
  for (size_t i = 0; i < n->size(); ++i) n->values[i] = a.values()[i] + b.values()[i];
  n->backward_fn = [](NodeT<T>& self) {
    for (size_t i = 0; i < self.size(); ++i) {
      self.parents[0]->adjoint[i] += self.adjoint[i];
      self.parents[1]->adjoint[i] += self.adjoint[i];
    }
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape() != b.shape()) shape_fail("sub", a.shape(), b.shape());
  auto n = detail::make_node<T>(a.shape(), {a.node(), b.node()});
  for (size_t i = 0; i < n->size(); ++i) n->values[i] = a.values()[i] - b.values()[i];
  n->backward_fn = [](NodeT<T>& self) {
    for (size_t i = 0; i < self.size(); ++i) {
      self.parents[0]->adjoint[i] += self.adjoint[i];
      self.parents[1]->adjoint[i] -= self.adjoint[i];
    }
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
  auto n = detail::make_node<T>(a.shape(), {a.node(), b.node()});
  for (size_t i = 0; i < n->size(); ++i) n->values[i] = a.values()[i] * b.values()[i];
  n->backward_fn = [](NodeT<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (size_t i = 0; i < self.size(); ++i) {
      pa.adjoint[i] += self.adjoint[i] * pb.values[i];
      pb.adjoint[i] += self.adjoint[i] * pa.values[i];
    }
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> add_scalar(const TensorT<T>& a, T c) {
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  for (size_t i = 0; i < n->size(); ++i) n->values[i] = a.values()[i] + c;
  n->backward_fn = [](NodeT<T>& self) {
    for (size_t i = 0; i < self.size(); ++i) self.parents[0]->adjoint[i] += self.adjoint[i];
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> mul_scalar(const TensorT<T>& a, T c) {
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  for (size_t i = 0; i < n->size(); ++i) n->values[i] = a.values()[i] * c;
  n->backward_fn = [c](NodeT<T>& self) {
    for (size_t i = 0; i < self.size(); ++i) self.parents[0]->adjoint[i] += self.adjoint[i] * c;
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> relu(const TensorT<T>& a) {
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  for (size_t i = 0; i < n->size(); ++i) n->values[i] = a.values()[i] > T(0) ? a.values()[i] : T(0);
  n->backward_fn = [](NodeT<T>& self) {
    for (size_t i = 0; i < self.size(); ++i)
      if (self.parents[0]->values[i] > T(0)) self.parents[0]->adjoint[i] += self.adjoint[i];
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& a) {
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  for (size_t i = 0; i < n->size(); ++i)
    n->values[i] = T(1) / (T(1) + std::exp(-a.values()[i]));
  n->backward_fn = [](NodeT<T>& self) {
    for (size_t i = 0; i < self.size(); ++i) {
      const T y = self.values[i];
      self.parents[0]->adjoint[i] += self.adjoint[i] * y * (T(1) - y);
    }
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> tanh(const TensorT<T>& a) {
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  for (size_t i = 0; i < n->size(); ++i) n->values[i] = std::tanh(a.values()[i]);
  n->backward_fn = [](NodeT<T>& self) {
    for (size_t i = 0; i < self.size(); ++i) {
      const T y = self.values[i];
      self.parents[0]->adjoint[i] += self.adjoint[i] * (T(1) - y * y);
    }
  };
  return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    shape_fail("matmul", a.shape(), b.shape());
  const int m = a.dim(0), k = a.dim(1), p = b.dim(1);
  auto n = detail::make_node<T>({m, p}, {a.node(), b.node()});
  const T* av = a.values().data();
  const T* bv = b.values().data();
  T* yv = n->values.data();
  for (int i = 0; i < m; ++i)
    for (int t = 0; t < k; ++t) {
      const T x = av[i * k + t];
      if (x == T(0)) continue;
      const T* brow = bv + static_cast<size_t>(t) * p;
      T* yrow = yv + static_cast<size_t>(i) * p;
      for (int j = 0; j < p; ++j) yrow[j] += x * brow[j];
    }
  n->backward_fn = [m, k, p](NodeT<T>& self) {
    const T* g = self.adjoint.data();
    const T* av2 = self.parents[0]->values.data();
    const T* bv2 = self.parents[1]->values.data();
    T* da = self.parents[0]->adjoint.data();
    T* db = self.parents[1]->adjoint.data();
    // dA = dY * B^T ; dB = A^T * dY
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < p; ++j) {
        const T gy = g[i * p + j];
        if (gy == T(0)) continue;
        for (int t = 0; t < k; ++t) {
          da[i * k + t] += gy * bv2[t * p + j];
          db[t * p + j] += gy * av2[i * k + t];
        }
      }
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> transpose(const TensorT<T>& a) {
  if (a.rank() != 2) fail("ShapeMismatch", "transpose needs rank 2, got " + shape_str(a.shape()));
  const int m = a.dim(0), k = a.dim(1);
  auto n = detail::make_node<T>({k, m}, {a.node()});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j) n->values[static_cast<size_t>(j) * m + i] = a.values()[static_cast<size_t>(i) * k + j];
  n->backward_fn = [m, k](NodeT<T>& self) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < k; ++j)
        self.parents[0]->adjoint[static_cast<size_t>(i) * k + j] +=
            self.adjoint[static_cast<size_t>(j) * m + i];
  };
  return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// Axis broadcasts: v is 1-D with length shape[axis]
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> add_axis(const TensorT<T>& a, const TensorT<T>& v, int axis) {
  const auto span = detail::axis_span(a.shape(), axis);
  if (v.rank() != 1 || static_cast<size_t>(v.dim(0)) != span.n)
    shape_fail("add_axis", a.shape(), v.shape());
  auto n = detail::make_node<T>(a.shape(), {a.node(), v.node()});
  for (size_t o = 0; o < span.outer; ++o)
    for (size_t k = 0; k < span.n; ++k) {
      const size_t base = (o * span.n + k) * span.inner;
      for (size_t i = 0; i < span.inner; ++i)
        n->values[base + i] = a.values()[base + i] + v.values()[k];
    }
  n->backward_fn = [span](NodeT<T>& self) {
    for (size_t o = 0; o < span.outer; ++o)
      for (size_t k = 0; k < span.n; ++k) {
        const size_t base = (o * span.n + k) * span.inner;
        T acc = T(0);
        for (size_t i = 0; i < span.inner; ++i) {
          self.parents[0]->adjoint[base + i] += self.adjoint[base + i];
          acc += self.adjoint[base + i];
        }
        self.parents[1]->adjoint[k] += acc;
      }
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> mul_axis(const TensorT<T>& a, const TensorT<T>& v, int axis) {
  const auto span = detail::axis_span(a.shape(), axis);
  if (v.rank() != 1 || static_cast<size_t>(v.dim(0)) != span.n)
    shape_fail("mul_axis", a.shape(), v.shape());
  auto n = detail::make_node<T>(a.shape(), {a.node(), v.node()});
  for (size_t o = 0; o < span.outer; ++o)
    for (size_t k = 0; k < span.n; ++k) {
      const size_t base = (o * span.n + k) * span.inner;
      for (size_t i = 0; i < span.inner; ++i)
        n->values[base + i] = a.values()[base + i] * v.values()[k];
    }
  n->backward_fn = [span](NodeT<T>& self) {
    auto& pa = *self.parents[0];
    auto& pv = *self.parents[1];
    for (size_t o = 0; o < span.outer; ++o)
      for (size_t k = 0; k < span.n; ++k) {
        const size_t base = (o * span.n + k) * span.inner;
        T acc = T(0);
        for (size_t i = 0; i < span.inner; ++i) {
          pa.adjoint[base + i] += self.adjoint[base + i] * pv.values[k];
          acc += self.adjoint[base + i] * pa.values[base + i];
        }
        pv.adjoint[k] += acc;
      }
  };
  return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// Softmax family and normalization
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> softmax(const TensorT<T>& a, int axis) {
  const auto span = detail::axis_span(a.shape(), axis);
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  for (size_t o = 0; o < span.outer; ++o)
    for (size_t i = 0; i < span.inner; ++i) {
      T mx = a.values()[o * span.n * span.inner + i];
      for (size_t k = 1; k < span.n; ++k)
        mx = std::max(mx, a.values()[(o * span.n + k) * span.inner + i]);
      T z = T(0);
      for (size_t k = 0; k < span.n; ++k) {
        const size_t idx = (o * span.n + k) * span.inner + i;
        n->values[idx] = std::exp(a.values()[idx] - mx);
        z += n->values[idx];
      }
      for (size_t k = 0; k < span.n; ++k) n->values[(o * span.n + k) * span.inner + i] /= z;
    }
  n->backward_fn = [span](NodeT<T>& self) {
    for (size_t o = 0; o < span.outer; ++o)
      for (size_t i = 0; i < span.inner; ++i) {
        T dot = T(0);
        for (size_t k = 0; k < span.n; ++k) {
          const size_t idx = (o * span.n + k) * span.inner + i;
          dot += self.adjoint[idx] * self.values[idx];
        }
        for (size_t k = 0; k < span.n; ++k) {
          const size_t idx = (o * span.n + k) * span.inner + i;
          self.parents[0]->adjoint[idx] += self.values[idx] * (self.adjoint[idx] - dot);
        }
      }
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> log_softmax(const TensorT<T>& a, int axis) {
  const auto span = detail::axis_span(a.shape(), axis);
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  for (size_t o = 0; o < span.outer; ++o)
    for (size_t i = 0; i < span.inner; ++i) {
      T mx = a.values()[o * span.n * span.inner + i];
      for (size_t k = 1; k < span.n; ++k)
        mx = std::max(mx, a.values()[(o * span.n + k) * span.inner + i]);
      T z = T(0);
      for (size_t k = 0; k < span.n; ++k)
        z += std::exp(a.values()[(o * span.n + k) * span.inner + i] - mx);
      const T lse = mx + std::log(z);
      for (size_t k = 0; k < span.n; ++k) {
        const size_t idx = (o * span.n + k) * span.inner + i;
        n->values[idx] = a.values()[idx] - lse;
      }
    }
  n->backward_fn = [span](NodeT<T>& self) {
    // dx = dy - softmax(x) * sum(dy)
    for (size_t o = 0; o < span.outer; ++o)
      for (size_t i = 0; i < span.inner; ++i) {
        T gsum = T(0);
        for (size_t k = 0; k < span.n; ++k)
          gsum += self.adjoint[(o * span.n + k) * span.inner + i];
        for (size_t k = 0; k < span.n; ++k) {
          const size_t idx = (o * span.n + k) * span.inner + i;
          self.parents[0]->adjoint[idx] +=
              self.adjoint[idx] - std::exp(self.values[idx]) * gsum;
        }
      }
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> layer_norm(const TensorT<T>& a, int axis, T eps = T(1e-5)) {
  const auto span = detail::axis_span(a.shape(), axis);
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  const T inv_n = T(1) / static_cast<T>(span.n);
  for (size_t o = 0; o < span.outer; ++o)
    for (size_t i = 0; i < span.inner; ++i) {
      T mean = T(0);
      for (size_t k = 0; k < span.n; ++k)
        mean += a.values()[(o * span.n + k) * span.inner + i];
      mean *= inv_n;
      T var = T(0);
      for (size_t k = 0; k < span.n; ++k) {
        const T d = a.values()[(o * span.n + k) * span.inner + i] - mean;
        var += d * d;
      }
      var *= inv_n;
      const T inv_std = T(1) / std::sqrt(var + eps);
      for (size_t k = 0; k < span.n; ++k) {
        const size_t idx = (o * span.n + k) * span.inner + i;
        n->values[idx] = (a.values()[idx] - mean) * inv_std;
      }
    }
  n->backward_fn = [span, eps, inv_n](NodeT<T>& self) {
    // With y = (x - mu) / s: dx = (dy - mean(dy) - y * mean(dy * y)) / s.
    auto& pa = *self.parents[0];
    for (size_t o = 0; o < span.outer; ++o)
      for (size_t i = 0; i < span.inner; ++i) {
        T mean = T(0), var = T(0);
        for (size_t k = 0; k < span.n; ++k)
          mean += pa.values[(o * span.n + k) * span.inner + i];
        mean *= inv_n;
        for (size_t k = 0; k < span.n; ++k) {
          const T d = pa.values[(o * span.n + k) * span.inner + i] - mean;
          var += d * d;
        }
        var *= inv_n;
        const T inv_std = T(1) / std::sqrt(var + eps);
        T gmean = T(0), gydot = T(0);
        for (size_t k = 0; k < span.n; ++k) {
          const size_t idx = (o * span.n + k) * span.inner + i;
          gmean += self.adjoint[idx];
          gydot += self.adjoint[idx] * self.values[idx];
        }
        gmean *= inv_n;
        gydot *= inv_n;
        for (size_t k = 0; k < span.n; ++k) {
          const size_t idx = (o * span.n + k) * span.inner + i;
          pa.adjoint[idx] +=
              (self.adjoint[idx] - gmean - self.values[idx] * gydot) * inv_std;
        }
      }
  };
  return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// Convolution and pooling (inputs are (C, H, W))
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, int stride, int padding) {
  if (x.rank() != 3 || w.rank() != 4 || x.dim(0) != w.dim(1))
    shape_fail("conv2d", x.shape(), w.shape());
  if (stride < 1) fail("InvalidArgument", "conv2d stride must be >= 1");
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int F = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  const int OH = (H + 2 * padding - KH) / stride + 1;
  const int OW = (W + 2 * padding - KW) / stride + 1;
  if (OH < 1 || OW < 1) shape_fail("conv2d output empty", x.shape(), w.shape());
  auto n = detail::make_node<T>({F, OH, OW}, {x.node(), w.node()});

  // For a fixed tap (i, j), valid output rows/cols form a contiguous range.
  // Value captures: these closures outlive this frame inside backward_fn.
  const auto lo = [padding, stride](int k) {
    return std::max(0, (padding - k + stride - 1) / stride);
  };
  const auto hi_row = [OH, H, padding, stride](int k) {
    return std::min(OH - 1, (H - 1 + padding - k) / stride);
  };
  const auto hi_col = [OW, W, padding, stride](int k) {
    return std::min(OW - 1, (W - 1 + padding - k) / stride);
  };

  const T* xv = x.values().data();
  const T* wv = w.values().data();
  T* yv = n->values.data();
  for (int f = 0; f < F; ++f)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < KH; ++i) {
        const int oh0 = lo(i), oh1 = hi_row(i);
        for (int j = 0; j < KW; ++j) {
          const T wt = wv[((static_cast<size_t>(f) * C + c) * KH + i) * KW + j];
          if (wt == T(0)) continue;
          const int ow0 = lo(j), ow1 = hi_col(j);
          for (int oh = oh0; oh <= oh1; ++oh) {
            const int ih = oh * stride - padding + i;
            const T* xrow = xv + (static_cast<size_t>(c) * H + ih) * W;
            T* yrow = yv + (static_cast<size_t>(f) * OH + oh) * OW;
            for (int ow = ow0; ow <= ow1; ++ow)
              yrow[ow] += wt * xrow[ow * stride - padding + j];
          }
        }
      }

  n->backward_fn = [C, H, W, F, KH, KW, OH, OW, stride, padding, lo, hi_row,
                    hi_col](NodeT<T>& self) {
    const T* g = self.adjoint.data();
    const T* xv2 = self.parents[0]->values.data();
    const T* wv2 = self.parents[1]->values.data();
    T* dx = self.parents[0]->adjoint.data();
    T* dw = self.parents[1]->adjoint.data();
    for (int f = 0; f < F; ++f)
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < KH; ++i) {
          const int oh0 = lo(i), oh1 = hi_row(i);
          for (int j = 0; j < KW; ++j) {
            const size_t widx = ((static_cast<size_t>(f) * C + c) * KH + i) * KW + j;
            const T wt = wv2[widx];
            T wacc = T(0);
            const int ow0 = lo(j), ow1 = hi_col(j);
            for (int oh = oh0; oh <= oh1; ++oh) {
              const int ih = oh * stride - padding + i;
              const T* grow = g + (static_cast<size_t>(f) * OH + oh) * OW;
              const T* xrow = xv2 + (static_cast<size_t>(c) * H + ih) * W;
              T* dxrow = dx + (static_cast<size_t>(c) * H + ih) * W;
              for (int ow = ow0; ow <= ow1; ++ow) {
                const int iw = ow * stride - padding + j;
                dxrow[iw] += grow[ow] * wt;
                wacc += grow[ow] * xrow[iw];
              }
            }
            dw[widx] += wacc;
          }
        }
  };
  return TensorT<T>(n);
}

/// Window average pooling with count-valid edge handling. ceil_mode adds a
/// partial trailing window when the input does not divide evenly.
template <typename T>
TensorT<T> avg_pool2d(const TensorT<T>& x, int k, int stride, bool ceil_mode) {
  if (x.rank() != 3) fail("ShapeMismatch", "avg_pool2d needs (C,H,W), got " + shape_str(x.shape()));
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const auto out_dim = [&](int d) {
    return (ceil_mode ? (d - k + stride - 1) : (d - k)) / stride + 1;
  };
  const int OH = std::max(1, out_dim(H)), OW = std::max(1, out_dim(W));
  auto n = detail::make_node<T>({C, OH, OW}, {x.node()});
  for (int c = 0; c < C; ++c)
    for (int oh = 0; oh < OH; ++oh)
      for (int ow = 0; ow < OW; ++ow) {
        const int h0 = oh * stride, w0 = ow * stride;
        const int h1 = std::min(h0 + k, H), w1 = std::min(w0 + k, W);
        T acc = T(0);
        for (int h = h0; h < h1; ++h)
          for (int wcol = w0; wcol < w1; ++wcol)
            acc += x.values()[(static_cast<size_t>(c) * H + h) * W + wcol];
        n->values[(static_cast<size_t>(c) * OH + oh) * OW + ow] =
            acc / static_cast<T>((h1 - h0) * (w1 - w0));
      }
  n->backward_fn = [C, H, W, OH, OW, k, stride](NodeT<T>& self) {
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          const int h0 = oh * stride, w0 = ow * stride;
          const int h1 = std::min(h0 + k, H), w1 = std::min(w0 + k, W);
          const T g = self.adjoint[(static_cast<size_t>(c) * OH + oh) * OW + ow] /
                      static_cast<T>((h1 - h0) * (w1 - w0));
          for (int h = h0; h < h1; ++h)
            for (int wcol = w0; wcol < w1; ++wcol)
              self.parents[0]->adjoint[(static_cast<size_t>(c) * H + h) * W + wcol] += g;
        }
  };
  return TensorT<T>(n);
}

/// Global spatial sum pooling: (C, H, W) -> (C).
template <typename T>
TensorT<T> sum_pool2d(const TensorT<T>& x) {
  if (x.rank() != 3) fail("ShapeMismatch", "sum_pool2d needs (C,H,W), got " + shape_str(x.shape()));
  const int C = x.dim(0);
  const size_t hw = static_cast<size_t>(x.dim(1)) * x.dim(2);
  auto n = detail::make_node<T>({C}, {x.node()});
  for (int c = 0; c < C; ++c) {
    T acc = T(0);
    for (size_t i = 0; i < hw; ++i) acc += x.values()[c * hw + i];
    n->values[static_cast<size_t>(c)] = acc;
  }
  n->backward_fn = [C, hw](NodeT<T>& self) {
    for (int c = 0; c < C; ++c)
      for (size_t i = 0; i < hw; ++i)
        self.parents[0]->adjoint[c * hw + i] += self.adjoint[static_cast<size_t>(c)];
  };
  return TensorT<T>(n);
}

/// Global spatial average pooling: (C, H, W) -> (C).
template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
  if (x.rank() != 3)
    fail("ShapeMismatch", "global_avg_pool needs (C,H,W), got " + shape_str(x.shape()));
  const T inv = T(1) / static_cast<T>(static_cast<size_t>(x.dim(1)) * x.dim(2));
  return mul_scalar(sum_pool2d(x), inv);
}

// ---------------------------------------------------------------------------
// Structure ops
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> reshape(const TensorT<T>& a, Shape shape) {
  if (shape_size(shape) != a.size()) shape_fail("reshape", a.shape(), shape);
  auto n = detail::make_node<T>(std::move(shape), {a.node()});
  n->values = a.values();
  n->backward_fn = [](NodeT<T>& self) {
    for (size_t i = 0; i < self.size(); ++i) self.parents[0]->adjoint[i] += self.adjoint[i];
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> concat(const TensorT<T>& a, const TensorT<T>& b, int axis) {
  if (a.rank() != b.rank()) shape_fail("concat", a.shape(), b.shape());
  for (int i = 0; i < a.rank(); ++i)
    if (i != axis && a.dim(i) != b.dim(i)) shape_fail("concat", a.shape(), b.shape());
  Shape out = a.shape();
  out[static_cast<size_t>(axis)] += b.dim(axis);
  const auto sa = detail::axis_span(a.shape(), axis);
  const auto sb = detail::axis_span(b.shape(), axis);
  auto n = detail::make_node<T>(out, {a.node(), b.node()});
  const size_t block_a = sa.n * sa.inner, block_b = sb.n * sb.inner;
  for (size_t o = 0; o < sa.outer; ++o) {
    std::copy_n(a.values().data() + o * block_a, block_a,
                n->values.data() + o * (block_a + block_b));
    std::copy_n(b.values().data() + o * block_b, block_b,
                n->values.data() + o * (block_a + block_b) + block_a);
  }
  n->backward_fn = [sa, block_a, block_b](NodeT<T>& self) {
    for (size_t o = 0; o < sa.outer; ++o) {
      const T* g = self.adjoint.data() + o * (block_a + block_b);
      for (size_t i = 0; i < block_a; ++i) self.parents[0]->adjoint[o * block_a + i] += g[i];
      for (size_t i = 0; i < block_b; ++i)
        self.parents[1]->adjoint[o * block_b + i] += g[block_a + i];
    }
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> narrow(const TensorT<T>& a, int axis, int start, int len) {
  const auto span = detail::axis_span(a.shape(), axis);
  if (start < 0 || len < 1 || static_cast<size_t>(start + len) > span.n)
    fail("ShapeMismatch", "narrow [" + std::to_string(start) + "," + std::to_string(start + len) +
                              ") out of range for " + shape_str(a.shape()));
  Shape out = a.shape();
  out[static_cast<size_t>(axis)] = len;
  auto n = detail::make_node<T>(out, {a.node()});
  for (size_t o = 0; o < span.outer; ++o)
    for (int k = 0; k < len; ++k)
      std::copy_n(a.values().data() + (o * span.n + start + k) * span.inner, span.inner,
                  n->values.data() + (o * len + k) * span.inner);
  n->backward_fn = [span, start, len](NodeT<T>& self) {
    for (size_t o = 0; o < span.outer; ++o)
      for (int k = 0; k < len; ++k) {
        const T* g = self.adjoint.data() + (o * len + k) * span.inner;
        T* d = self.parents[0]->adjoint.data() + (o * span.n + start + k) * span.inner;
        for (size_t i = 0; i < span.inner; ++i) d[i] += g[i];
      }
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> embedding(const TensorT<T>& table, const std::vector<int>& ids) {
  if (table.rank() != 2)
    fail("ShapeMismatch", "embedding table must be rank 2, got " + shape_str(table.shape()));
  if (ids.empty()) fail("EmptySequence", "embedding of zero ids");
  const int V = table.dim(0), D = table.dim(1);
  for (int id : ids)
    if (id < 0 || id >= V)
      fail("IdOutOfRange", "embedding id " + std::to_string(id) + " outside [0, " +
                               std::to_string(V) + ")");
  auto n = detail::make_node<T>({static_cast<int>(ids.size()), D}, {table.node()});
  for (size_t t = 0; t < ids.size(); ++t)
    std::copy_n(table.values().data() + static_cast<size_t>(ids[t]) * D, D,
                n->values.data() + t * D);
  n->backward_fn = [ids, D](NodeT<T>& self) {
    for (size_t t = 0; t < ids.size(); ++t) {
      const T* g = self.adjoint.data() + t * D;
      T* d = self.parents[0]->adjoint.data() + static_cast<size_t>(ids[t]) * D;
      for (int i = 0; i < D; ++i) d[i] += g[i];
    }
  };
  return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> sum(const TensorT<T>& a) {
  auto n = detail::make_node<T>({1}, {a.node()});
  T acc = T(0);
  for (const T v : a.values()) acc += v;
  n->values[0] = acc;
  n->backward_fn = [](NodeT<T>& self) {
    for (auto& d : self.parents[0]->adjoint) d += self.adjoint[0];
  };
  return TensorT<T>(n);
}

template <typename T>
TensorT<T> mean(const TensorT<T>& a) {
  return mul_scalar(sum(a), T(1) / static_cast<T>(a.size()));
}

/// -(1/T) sum_t logp[t, ids[t]]; logp rows are log-probabilities.
template <typename T>
TensorT<T> nll_from_logprobs(const TensorT<T>& logp, const std::vector<int>& ids) {
  if (logp.rank() != 2 || static_cast<size_t>(logp.dim(0)) != ids.size())
    fail("ShapeMismatch", "nll: logp " + shape_str(logp.shape()) + " vs " +
                              std::to_string(ids.size()) + " targets");
  const int V = logp.dim(1);
  for (int id : ids)
    if (id < 0 || id >= V) fail("IdOutOfRange", "nll target " + std::to_string(id));
  auto n = detail::make_node<T>({1}, {logp.node()});
  T acc = T(0);
  for (size_t t = 0; t < ids.size(); ++t)
    acc += logp.values()[t * V + static_cast<size_t>(ids[t])];
  const T inv = T(1) / static_cast<T>(ids.size());
  n->values[0] = -acc * inv;
  n->backward_fn = [ids, V, inv](NodeT<T>& self) {
    for (size_t t = 0; t < ids.size(); ++t)
      self.parents[0]->adjoint[t * V + static_cast<size_t>(ids[t])] -= self.adjoint[0] * inv;
  };
  return TensorT<T>(n);
}

/// Mean over elements of the smooth-L1 penalty of x (the residual tensor).
template <typename T>
TensorT<T> huber_mean(const TensorT<T>& x) {
  auto n = detail::make_node<T>({1}, {x.node()});
  T acc = T(0);
  for (const T v : x.values())
    acc += std::abs(v) < T(1) ? T(0.5) * v * v : std::abs(v) - T(0.5);
  const T inv = T(1) / static_cast<T>(x.size());
  n->values[0] = acc * inv;
  n->backward_fn = [inv](NodeT<T>& self) {
    auto& p = *self.parents[0];
    for (size_t i = 0; i < p.values.size(); ++i) {
      const T v = p.values[i];
      const T d = std::abs(v) < T(1) ? v : (v > T(0) ? T(1) : T(-1));
      p.adjoint[i] += self.adjoint[0] * inv * d;
    }
  };
  return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// Attention helpers
// ---------------------------------------------------------------------------

/// Adds -1e9 to entries above the diagonal of a square score matrix.
template <typename T>
TensorT<T> causal_mask(const TensorT<T>& a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1))
    fail("ShapeMismatch", "causal_mask needs a square matrix, got " + shape_str(a.shape()));
  const int t = a.dim(0);
  auto n = detail::make_node<T>(a.shape(), {a.node()});
  n->values = a.values();
  for (int i = 0; i < t; ++i)
    for (int j = i + 1; j < t; ++j) n->values[static_cast<size_t>(i) * t + j] += T(-1e9);
  n->backward_fn = [](NodeT<T>& self) {
    for (size_t i = 0; i < self.size(); ++i) self.parents[0]->adjoint[i] += self.adjoint[i];
  };
  return TensorT<T>(n);
}

/// Coverage-refined row softmax. Rows attend in order; each row's logits are
/// suppressed where earlier rows already attended:
///   h_t = sum_{u<t} out[u], out[t] = softmax(raw[t] - relu(gain * h_t)).
/// Zero history (row 0, or gain <= 0 regions) reduces to plain softmax.
template <typename T>
TensorT<T> coverage_softmax(const TensorT<T>& raw, const TensorT<T>& gain) {
  if (raw.rank() != 2) fail("ShapeMismatch", "coverage_softmax needs (T,S), got " + shape_str(raw.shape()));
  if (gain.size() != 1)
    fail("ShapeMismatch", "coverage_softmax gain must be scalar, got " + shape_str(gain.shape()));
  const int rows = raw.dim(0), S = raw.dim(1);
  auto n = detail::make_node<T>(raw.shape(), {raw.node(), gain.node()});
  const T g = gain.values()[0];
  std::vector<T> hist(static_cast<size_t>(S), T(0));
  for (int t = 0; t < rows; ++t) {
    const T* r = raw.values().data() + static_cast<size_t>(t) * S;
    T* out = n->values.data() + static_cast<size_t>(t) * S;
    T mx = -std::numeric_limits<T>::infinity();
    for (int s = 0; s < S; ++s) {
      const T m = g * hist[static_cast<size_t>(s)];
      out[s] = r[s] - (m > T(0) ? m : T(0));
      mx = std::max(mx, out[s]);
    }
    T z = T(0);
    for (int s = 0; s < S; ++s) {
      out[s] = std::exp(out[s] - mx);
      z += out[s];
    }
    for (int s = 0; s < S; ++s) {
      out[s] /= z;
      hist[static_cast<size_t>(s)] += out[s];
    }
  }
  n->backward_fn = [rows, S](NodeT<T>& self) {
    auto& praw = *self.parents[0];
    auto& pgain = *self.parents[1];
    const T g = pgain.values[0];
    // Recompute per-row history by prefix sums of the refined output.
    std::vector<T> hist(static_cast<size_t>(rows) * S, T(0));
    for (int t = 1; t < rows; ++t)
      for (int s = 0; s < S; ++s)
        hist[static_cast<size_t>(t) * S + s] = hist[static_cast<size_t>(t - 1) * S + s] +
                                               self.values[static_cast<size_t>(t - 1) * S + s];
    std::vector<T> carry(static_cast<size_t>(S), T(0));  // dL/dh from later rows
    T dg = T(0);
    for (int t = rows - 1; t >= 0; --t) {
      const T* a = self.values.data() + static_cast<size_t>(t) * S;
      const T* h = hist.data() + static_cast<size_t>(t) * S;
      T dot = T(0);
      for (int s = 0; s < S; ++s)
        dot += (self.adjoint[static_cast<size_t>(t) * S + s] + carry[static_cast<size_t>(s)]) * a[s];
      for (int s = 0; s < S; ++s) {
        const T gtot = self.adjoint[static_cast<size_t>(t) * S + s] + carry[static_cast<size_t>(s)];
        const T dz = a[s] * (gtot - dot);
        praw.adjoint[static_cast<size_t>(t) * S + s] += dz;
        if (g * h[s] > T(0)) {
          carry[static_cast<size_t>(s)] += -dz * g;
          dg += -dz * h[s];
        }
      }
    }
    pgain.adjoint[0] += dg;
  };
  return TensorT<T>(n);
}

// ---------------------------------------------------------------------------
// GRU cell (composition of primitives; gradients come for free)
// ---------------------------------------------------------------------------

template <typename T>
struct GruParams {
  TensorT<T> w_z, u_z, b_z;  // update gate
  TensorT<T> w_r, u_r, b_r;  // reset gate
  TensorT<T> w_h, u_h, b_h;  // candidate
};

/// x: (1, Din), h: (1, Dh); returns h' = (1 - z) o h + z o tanh-candidate.
template <typename T>
TensorT<T> gru_cell(const TensorT<T>& x, const TensorT<T>& h, const GruParams<T>& p) {
  auto z = sigmoid(add_axis(add(matmul(x, p.w_z), matmul(h, p.u_z)), p.b_z, 1));
  auto r = sigmoid(add_axis(add(matmul(x, p.w_r), matmul(h, p.u_r)), p.b_r, 1));
  auto cand = tanh(add_axis(add(matmul(x, p.w_h), matmul(mul(r, h), p.u_h)), p.b_h, 1));
  auto one_minus_z = add_scalar(mul_scalar(z, T(-1)), T(1));
  return add(mul(one_minus_z, h), mul(z, cand));
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// Central finite differences against analytic grads. Returns the max over
/// coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
template <typename F>
double grad_check(F&& fn, std::vector<TensorT<double>>& inputs, double eps = 1e-5) {
  for (auto& in : inputs) in.zero_grad();
  fn(inputs).backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (auto& in : inputs) analytic.push_back(in.grad());

  double worst = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    auto& vals = inputs[i].values();
    for (size_t j = 0; j < vals.size(); ++j) {
      const double keep = vals[j];
      vals[j] = keep + eps;
      const double up = fn(inputs).item();
      vals[j] = keep - eps;
      const double down = fn(inputs).item();
      vals[j] = keep;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i][j];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Named-tensor checkpoint archive
// ---------------------------------------------------------------------------

template <typename T>
struct CheckpointData {
  std::vector<std::string> header;  // raw text lines, format owned by callers
  std::vector<std::pair<std::string, TensorT<T>>> entries;
};

template <typename T>
void save_checkpoint(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::pair<std::string, TensorT<T>>>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("IoFailure", "cannot open for writing: " + path);
  out << "mathrec-checkpoint 1\n";
  out << "header " << header.size() << "\n";
  for (const auto& line : header) out << line << "\n";
  out << "tensors " << entries.size() << "\n";
  for (const auto& [name, t] : entries) {
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
      fail("InvalidArgument", "bad tensor name '" + name + "'");
    out << name << " " << (sizeof(T) == 4 ? "f32" : "f64") << " " << t.rank();
    for (int d : t.shape()) out << " " << d;
    out << "\n";
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.size() * sizeof(T)));
  }
  out.flush();
  if (!out) fail("IoFailure", "write failed: " + path);
}

template <typename T>
CheckpointData<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("IoFailure", "cannot open: " + path);
  const auto corrupt = [&](const std::string& why) {
    fail("CorruptRecord", path + ": " + why);
  };
  std::string line;
  if (!std::getline(in, line) || line != "mathrec-checkpoint 1")
    corrupt("not a checkpoint file");
  size_t n_header = 0, n_tensors = 0;
  if (!std::getline(in, line) || line.rfind("header ", 0) != 0) corrupt("missing header count");
  n_header = std::stoul(line.substr(7));
  CheckpointData<T> data;
  for (size_t i = 0; i < n_header; ++i) {
    if (!std::getline(in, line)) corrupt("truncated header");
    data.header.push_back(line);
  }
  if (!std::getline(in, line) || line.rfind("tensors ", 0) != 0) corrupt("missing tensor count");
  n_tensors = std::stoul(line.substr(8));
  for (size_t i = 0; i < n_tensors; ++i) {
    if (!std::getline(in, line)) corrupt("truncated tensor list");
    std::string name, dtype;
    int rank = 0;
    size_t pos = 0;
    const auto next_word = [&]() {
      while (pos < line.size() && line[pos] == ' ') ++pos;
      const size_t begin = pos;
      while (pos < line.size() && line[pos] != ' ') ++pos;
      return line.substr(begin, pos - begin);
    };
    name = next_word();
    dtype = next_word();
    const std::string rank_s = next_word();
    if (name.empty() || rank_s.empty()) corrupt("bad tensor entry '" + line + "'");
    if (dtype != (sizeof(T) == 4 ? "f32" : "f64"))
      fail("CheckpointMismatch", path + ": dtype " + dtype + " does not match this build");
    rank = std::stoi(rank_s);
    Shape shape;
    for (int d = 0; d < rank; ++d) {
      const std::string w = next_word();
      if (w.empty()) corrupt("bad shape in '" + line + "'");
      shape.push_back(std::stoi(w));
    }
    auto t = TensorT<T>::zeros(shape);
    in.read(reinterpret_cast<char*>(t.values().data()),
            static_cast<std::streamsize>(t.size() * sizeof(T)));
    if (in.gcount() != static_cast<std::streamsize>(t.size() * sizeof(T)))
      corrupt("truncated values for '" + name + "'");
    data.entries.emplace_back(name, std::move(t));
  }
  return data;
}

using Tensor = TensorT<float>;

}  // namespace mathrec::tensor

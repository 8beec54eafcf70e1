#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "datk/tensor.hpp"

namespace datk {

namespace detail {

template <class T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

struct AxisSplit {
  int64_t outer, n, inner;
};

inline AxisSplit split_axis(const Shape& s, int axis) {
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  AxisSplit sp{1, s[static_cast<size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) sp.outer *= s[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) sp.inner *= s[i];
  return sp;
}

}  // namespace detail

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<T> y(a.data().size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] + b.data()[i];
  return detail::make_op_node<T>(a.shape(), std::move(y), {a.node(), b.node()},
                                 [](NodeT<T>& n) {
                                   for (int s = 0; s < 2; ++s) {
                                     auto& p = *n.parents[static_cast<size_t>(s)];
                                     if (!p.requires_grad) continue;
                                     p.ensure_grad();
                                     for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
                                   }
                                 });
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<T> y(a.data().size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] - b.data()[i];
  return detail::make_op_node<T>(a.shape(), std::move(y), {a.node(), b.node()},
                                 [](NodeT<T>& n) {
                                   auto& pa = *n.parents[0];
                                   auto& pb = *n.parents[1];
                                   if (pa.requires_grad) {
                                     pa.ensure_grad();
                                     for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
                                   }
                                   if (pb.requires_grad) {
                                     pb.ensure_grad();
                                     for (size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
                                   }
                                 });
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<T> y(a.data().size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * b.data()[i];
  return detail::make_op_node<T>(a.shape(), std::move(y), {a.node(), b.node()},
                                 [](NodeT<T>& n) {
                                   auto& pa = *n.parents[0];
                                   auto& pb = *n.parents[1];
                                   if (pa.requires_grad) {
                                     pa.ensure_grad();
                                     for (size_t i = 0; i < n.grad.size(); ++i)
                                       pa.grad[i] += n.grad[i] * pb.value[i];
                                   }
                                   if (pb.requires_grad) {
                                     pb.ensure_grad();
                                     for (size_t i = 0; i < n.grad.size(); ++i)
                                       pb.grad[i] += n.grad[i] * pa.value[i];
                                   }
                                 });
}

template <class T>
TensorT<T> scale(const TensorT<T>& x, T c) {
  std::vector<T> y(x.data().size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = x.data()[i] * c;
  return detail::make_op_node<T>(x.shape(), std::move(y), {x.node()},
                                 [c](NodeT<T>& n) {
                                   auto& p = *n.parents[0];
                                   p.ensure_grad();
                                   for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * c;
                                 });
}

// Broadcast multiply by a scalar graph node (used for learnable fusion
// weights).
template <class T>
TensorT<T> mul_scalar(const TensorT<T>& x, const TensorT<T>& s) {
  if (s.numel() != 1) throw DimensionError("mul_scalar: weight must be scalar");
  const T sv = s.data()[0];
  std::vector<T> y(x.data().size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = x.data()[i] * sv;
  return detail::make_op_node<T>(x.shape(), std::move(y), {x.node(), s.node()},
                                 [sv](NodeT<T>& n) {
                                   auto& px = *n.parents[0];
                                   auto& ps = *n.parents[1];
                                   if (px.requires_grad) {
                                     px.ensure_grad();
                                     for (size_t i = 0; i < n.grad.size(); ++i) px.grad[i] += n.grad[i] * sv;
                                   }
                                   if (ps.requires_grad) {
                                     ps.ensure_grad();
                                     T acc = 0;
                                     for (size_t i = 0; i < n.grad.size(); ++i)
                                       acc += n.grad[i] * px.value[i];
                                     ps.grad[0] += acc;
                                   }
                                 });
}

template <class T>
TensorT<T> sum(const TensorT<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  return detail::make_op_node<T>({1}, {acc}, {x.node()}, [](NodeT<T>& n) {
    auto& p = *n.parents[0];
    p.ensure_grad();
    const T g = n.grad[0];
    for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
  });
}

template <class T>
TensorT<T> mean(const TensorT<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <class T>
TensorT<T> relu(const TensorT<T>& x) {
  std::vector<T> y(x.data().size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
  return detail::make_op_node<T>(x.shape(), std::move(y), {x.node()}, [](NodeT<T>& n) {
    auto& p = *n.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i)
      if (p.value[i] > T(0)) p.grad[i] += n.grad[i];
  });
}

template <class T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  std::vector<T> y(x.data().size());
  for (size_t i = 0; i < y.size(); ++i) {
    const T v = x.data()[i];
    if (v >= T(0)) {
      y[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y[i] = e / (T(1) + e);
    }
  }
  return detail::make_op_node<T>(x.shape(), std::move(y), {x.node()}, [](NodeT<T>& n) {
    auto& p = *n.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) {
      const T s = n.value[i];
      p.grad[i] += n.grad[i] * s * (T(1) - s);
    }
  });
}

template <class T>
TensorT<T> softmax(const TensorT<T>& x, int axis) {
  const auto sp = detail::split_axis(x.shape(), axis);
  std::vector<T> y(x.data().size());
  for (int64_t o = 0; o < sp.outer; ++o) {
    for (int64_t in = 0; in < sp.inner; ++in) {
      const int64_t base = o * sp.n * sp.inner + in;
      T mx = x.data()[static_cast<size_t>(base)];
      for (int64_t a = 1; a < sp.n; ++a)
        mx = std::max(mx, x.data()[static_cast<size_t>(base + a * sp.inner)]);
      T z = 0;
      for (int64_t a = 0; a < sp.n; ++a) {
        const T e = std::exp(x.data()[static_cast<size_t>(base + a * sp.inner)] - mx);
        y[static_cast<size_t>(base + a * sp.inner)] = e;
        z += e;
      }
      for (int64_t a = 0; a < sp.n; ++a) y[static_cast<size_t>(base + a * sp.inner)] /= z;
    }
  }
  return detail::make_op_node<T>(x.shape(), std::move(y), {x.node()}, [sp](NodeT<T>& n) {
    auto& p = *n.parents[0];
    p.ensure_grad();
    for (int64_t o = 0; o < sp.outer; ++o) {
      for (int64_t in = 0; in < sp.inner; ++in) {
        const int64_t base = o * sp.n * sp.inner + in;
        T dot = 0;
        for (int64_t a = 0; a < sp.n; ++a) {
          const auto i = static_cast<size_t>(base + a * sp.inner);
          dot += n.grad[i] * n.value[i];
        }
        for (int64_t a = 0; a < sp.n; ++a) {
          const auto i = static_cast<size_t>(base + a * sp.inner);
          p.grad[i] += n.value[i] * (n.grad[i] - dot);
        }
      }
    }
  });
}

// Index one slice out of an axis; the result drops that axis (a scalar
// result keeps shape [1]).
template <class T>
TensorT<T> select(const TensorT<T>& x, int axis, int index) {
  const auto sp = detail::split_axis(x.shape(), axis);
  if (index < 0 || index >= sp.n)
    throw DimensionError("select: index " + std::to_string(index) + " out of range");
  Shape out_shape;
  for (int i = 0; i < x.rank(); ++i)
    if (i != axis) out_shape.push_back(x.shape()[static_cast<size_t>(i)]);
  if (out_shape.empty()) out_shape = {1};
  std::vector<T> y(static_cast<size_t>(sp.outer * sp.inner));
  for (int64_t o = 0; o < sp.outer; ++o)
    for (int64_t in = 0; in < sp.inner; ++in)
      y[static_cast<size_t>(o * sp.inner + in)] =
          x.data()[static_cast<size_t>(o * sp.n * sp.inner + index * sp.inner + in)];
  return detail::make_op_node<T>(std::move(out_shape), std::move(y), {x.node()},
                                 [sp, index](NodeT<T>& n) {
                                   auto& p = *n.parents[0];
                                   p.ensure_grad();
                                   for (int64_t o = 0; o < sp.outer; ++o)
                                     for (int64_t in = 0; in < sp.inner; ++in)
                                       p.grad[static_cast<size_t>(o * sp.n * sp.inner +
                                                                  index * sp.inner + in)] +=
                                           n.grad[static_cast<size_t>(o * sp.inner + in)];
                                 });
}

template <class T>
TensorT<T> reshape(const TensorT<T>& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel())
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(new_shape) +
                         " changes element count");
  std::vector<T> y = x.data();
  return detail::make_op_node<T>(std::move(new_shape), std::move(y), {x.node()}, [](NodeT<T>& n) {
    auto& p = *n.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
  });
}

// Identity forward; backward multiplies the incoming gradient by
// -lambda. This is the entire mechanism that turns a descent step on the
// domain loss into an ascent step for everything upstream.
template <class T>
TensorT<T> grad_reverse(const TensorT<T>& x, T lambda) {
  if (lambda < T(0)) throw ConfigError("grad_reverse: lambda must be non-negative");
  std::vector<T> y = x.data();
  return detail::make_op_node<T>(x.shape(), std::move(y), {x.node()}, [lambda](NodeT<T>& n) {
    auto& p = *n.parents[0];
    p.ensure_grad();
    // lambda == 0 blocks the edge outright; -0 * g would turn upstream
    // infinities into NaN instead of the contractual exact zero.
    if (lambda == T(0)) return;
    for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += -lambda * n.grad[i];
  });
}

}  // namespace datk

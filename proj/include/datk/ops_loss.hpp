#pragma once

#include <cmath>

#include "datk/ops_basic.hpp"

namespace datk {

inline constexpr double kBceEps = 1e-6;

// Elementwise -[t*log(p) + (1-t)*log(1-p)] with p clamped to
// [eps, 1-eps] so the loss stays finite. Gradient is zero in the clamped
// region, matching the flat clamp.
template <class T>
TensorT<T> bce_map(const TensorT<T>& p, const TensorT<T>& t, T eps = T(kBceEps)) {
  detail::check_same_shape(p, t, "bce_map");
  std::vector<T> y(p.data().size());
  for (size_t i = 0; i < y.size(); ++i) {
    const T pc = std::min(std::max(p.data()[i], eps), T(1) - eps);
    y[i] = -(t.data()[i] * std::log(pc) + (T(1) - t.data()[i]) * std::log(T(1) - pc));
  }
  return detail::make_op_node<T>(p.shape(), std::move(y), {p.node(), t.node()},
                                 [eps](NodeT<T>& n) {
                                   auto& pp = *n.parents[0];
                                   auto& pt = *n.parents[1];
                                   if (pp.requires_grad) {
                                     pp.ensure_grad();
                                     for (size_t i = 0; i < n.grad.size(); ++i) {
                                       const T pv = pp.value[i];
                                       if (pv <= eps || pv >= T(1) - eps) continue;
                                       const T tv = pt.value[i];
                                       pp.grad[i] += n.grad[i] * (-tv / pv + (T(1) - tv) / (T(1) - pv));
                                     }
                                   }
                                   if (pt.requires_grad) {
                                     pt.ensure_grad();
                                     for (size_t i = 0; i < n.grad.size(); ++i) {
                                       const T pc = std::min(std::max(pp.value[i], eps), T(1) - eps);
                                       pt.grad[i] += n.grad[i] * (std::log(T(1) - pc) - std::log(pc));
                                     }
                                   }
                                 });
}

template <class T>
TensorT<T> binary_cross_entropy(const TensorT<T>& p, const TensorT<T>& t, T eps = T(kBceEps)) {
  return mean(bce_map(p, t, eps));
}

// Elementwise smooth-L1 (Huber with beta = 1): 0.5*d^2 for |d| < 1,
// |d| - 0.5 otherwise.
template <class T>
TensorT<T> smooth_l1_map(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "smooth_l1_map");
  std::vector<T> y(a.data().size());
  for (size_t i = 0; i < y.size(); ++i) {
    const T d = a.data()[i] - b.data()[i];
    const T ad = std::abs(d);
    y[i] = ad < T(1) ? T(0.5) * d * d : ad - T(0.5);
  }
  return detail::make_op_node<T>(a.shape(), std::move(y), {a.node(), b.node()},
                                 [](NodeT<T>& n) {
                                   auto& pa = *n.parents[0];
                                   auto& pb = *n.parents[1];
                                   for (size_t i = 0; i < n.grad.size(); ++i) {
                                     const T d = pa.value[i] - pb.value[i];
                                     const T psi = d < T(-1) ? T(-1) : (d > T(1) ? T(1) : d);
                                     if (pa.requires_grad) {
                                       pa.ensure_grad();
                                       pa.grad[i] += n.grad[i] * psi;
                                     }
                                     if (pb.requires_grad) {
                                       pb.ensure_grad();
                                       pb.grad[i] -= n.grad[i] * psi;
                                     }
                                   }
                                 });
}

template <class T>
TensorT<T> smooth_l1(const TensorT<T>& a, const TensorT<T>& b) {
  return mean(smooth_l1_map(a, b));
}

}  // namespace datk

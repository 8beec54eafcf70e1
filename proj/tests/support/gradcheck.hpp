#pragma once

// Central finite-difference gradient checking. The checker perturbs every
// element of every input, so keep test tensors small.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "datk/ops.hpp"
#include "datk/rng.hpp"
#include "datk/tensor.hpp"

namespace datk::testing {

struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::string worst;  // "input 0, element 12"
  bool ok(double tol) const { return max_rel_err < tol; }
};

// Relative error with an absolute floor so near-zero gradients compare on
// absolute terms.
inline double rel_err(double a, double b, double floor_v) {
  const double diff = std::abs(a - b);
  const double denom = std::max({std::abs(a), std::abs(b), floor_v});
  return diff / denom;
}

// fn maps inputs to a scalar tensor. Analytic gradients are compared to
// numeric_scale * (f(x+h) - f(x-h)) / 2h per element. numeric_scale is 1
// for ordinary ops; a gradient-reversal composition is checked against
// -lambda times the numeric derivative of its identity forward.
template <class T>
GradCheckResult grad_check(
    const std::function<TensorT<T>(const std::vector<TensorT<T>>&)>& fn,
    std::vector<TensorT<T>> inputs, T h = T(1e-5), double abs_floor = 1e-6,
    double numeric_scale = 1.0) {
  GradCheckResult res;

  auto loss = fn(inputs);
  for (auto& t : inputs) t.zero_grad();
  backward(loss);

  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& t = inputs[ti];
    if (!t.requires_grad()) continue;
    const std::vector<T> analytic = t.grad();
    for (size_t i = 0; i < t.data().size(); ++i) {
      const T orig = t.data()[i];
      t.data()[i] = orig + h;
      const double fp = static_cast<double>(fn(inputs).item());
      t.data()[i] = orig - h;
      const double fm = static_cast<double>(fn(inputs).item());
      t.data()[i] = orig;
      const double numeric = numeric_scale * (fp - fm) / (2.0 * static_cast<double>(h));
      const double e = rel_err(static_cast<double>(analytic[i]), numeric, abs_floor);
      if (e > res.max_rel_err) {
        res.max_rel_err = e;
        res.max_abs_err = std::abs(static_cast<double>(analytic[i]) - numeric);
        res.worst = "input " + std::to_string(ti) + ", element " + std::to_string(i);
      }
    }
  }
  return res;
}

// Random tensor with entries away from common kink points (0 for relu,
// +-1 for smooth-l1 differences).
template <class T>
TensorT<T> random_tensor(Shape shape, Rng& rng, bool requires_grad, double lo = -2.0,
                         double hi = 2.0) {
  std::vector<T> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return TensorT<T>::from_data(std::move(shape), std::move(v), requires_grad);
}

// Random tensor bounded inside (eps, 1-eps); used for probability inputs.
template <class T>
TensorT<T> random_prob_tensor(Shape shape, Rng& rng, bool requires_grad) {
  std::vector<T> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = static_cast<T>(rng.uniform(0.05, 0.95));
  return TensorT<T>::from_data(std::move(shape), std::move(v), requires_grad);
}

// Reduce an op output to a scalar with fixed random weights so every
// output element influences the loss. The weights depend only on the seed
// and output shape, so repeated evaluations inside the finite-difference
// loop see the same loss function.
template <class T>
TensorT<T> weighted_sum(const TensorT<T>& y, uint64_t seed) {
  Rng rng(seed);
  std::vector<T> w(y.data().size());
  for (auto& x : w) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  auto weights = TensorT<T>::from_data(y.shape(), std::move(w), false);
  return sum(mul(y, weights));
}

}  // namespace datk::testing

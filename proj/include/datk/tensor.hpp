#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "datk/errors.hpp"

namespace datk {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// One record of the computation graph. Derived nodes keep handles to their
// inputs plus a closure that pulls this node's gradient into them. The
// graph is rebuilt on every forward pass; nothing is reused across
// iterations.
template <class T>
struct NodeT {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty means "not yet touched" (all zero)
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<NodeT<T>>> parents;
  std::function<void(NodeT<T>&)> backward_fn;

  int64_t numel() const { return static_cast<int64_t>(value.size()); }

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

// Value-semantics handle onto a graph node. Cheap to copy; copies alias
// the same node. Tensors are immutable after forward except for leaf
// mutation by the optimizer (data()) and gradient accumulation.
template <class T>
class TensorT {
 public:
  TensorT() = default;
  explicit TensorT(std::shared_ptr<NodeT<T>> n) : node_(std::move(n)) {}

  static TensorT zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }

  static TensorT filled(Shape shape, T v, bool requires_grad = false) {
    auto n = std::make_shared<NodeT<T>>();
    n->value.assign(static_cast<size_t>(shape_numel(shape)), v);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return TensorT(std::move(n));
  }

  static TensorT from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
      throw DimensionError("tensor data size " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    auto n = std::make_shared<NodeT<T>>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return TensorT(std::move(n));
  }

  static TensorT scalar(T v, bool requires_grad = false) {
    return from_data({1}, {v}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int64_t numel() const { return node_->numel(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::vector<T>& data() { return node_->value; }
  const std::vector<T>& data() const { return node_->value; }

  const std::vector<T>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }

  void zero_grad() {
    node_->grad.assign(node_->value.size(), T(0));
  }

  T item() const {
    if (numel() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
    return node_->value[0];
  }

  std::shared_ptr<NodeT<T>> node() const { return node_; }

 private:
  std::shared_ptr<NodeT<T>> node_;
};

namespace detail {

// Derived-node factory. If no input needs gradients the parent links and
// the closure are dropped so inference builds no graph.
template <class T>
TensorT<T> make_op_node(Shape shape, std::vector<T> value,
                        std::vector<std::shared_ptr<NodeT<T>>> parents,
                        std::function<void(NodeT<T>&)> backward_fn) {
  auto n = std::make_shared<NodeT<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->is_leaf = false;
  for (const auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return TensorT<T>(std::move(n));
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. Repeated calls without zero_grad
// accumulate into leaf gradients.
template <class T>
void backward(const TensorT<T>& loss) {
  if (loss.numel() != 1)
    throw ContractError("backward() requires a scalar loss, got " + shape_str(loss.shape()));

  // Iterative post-order DFS; each node enters the topological order once.
  std::vector<NodeT<T>*> topo;
  std::unordered_set<NodeT<T>*> seen;
  std::vector<std::pair<NodeT<T>*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeT<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  // Leaf gradients accumulate across backward calls; derived-node
  // gradients are per-sweep scratch and start from zero.
  for (NodeT<T>* n : topo)
    if (!n->is_leaf) n->grad.assign(n->value.size(), T(0));

  loss.node()->ensure_grad();
  loss.node()->grad[0] += T(1);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    NodeT<T>* n = *it;
    if (!n->requires_grad) continue;
    n->ensure_grad();
    if (n->backward_fn) n->backward_fn(*n);
  }
}

using Tensor = TensorT<float>;

}  // namespace datk

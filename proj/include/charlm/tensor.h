#pragma once

#include <functional>
#include <memory>
#include <numeric>
#include <unordered_set>
#include <vector>

#include "charlm/common.h"

// Reverse-mode autodiff over dense row-major arrays. A TensorT is a shared
// handle to a graph node; ops (see ops.h) create nodes that record their
// parents and a backward closure. backward() on a scalar root walks the
// graph in reverse topological order and accumulates gradients additively,
// so a parameter used along several paths receives the sum of all path
// gradients.

namespace charlm {

template <typename T>
struct Node {
  std::vector<size_t> shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized lazily by ensure_grad()
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // absent on leaves
  bool requires_grad = false;
  const char* op = "leaf";

  size_t size() const { return value.size(); }

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

// Grad recording is on by default; wrap evaluation-only code in NoGradGuard
// to build plain values without backward closures.
namespace detail {
inline thread_local bool g_grad_enabled = true;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(detail::g_grad_enabled) { detail::g_grad_enabled = false; }
  ~NoGradGuard() { detail::g_grad_enabled = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::g_grad_enabled; }

inline size_t shape_product(const std::vector<size_t>& shape) {
  size_t p = 1;
  for (size_t d : shape) p *= d;
  return p;
}

template <typename T>
class TensorT {
 public:
  TensorT() = default;

  static TensorT zeros(std::vector<size_t> shape) {
    auto n = std::make_shared<Node<T>>();
    n->value.assign(shape_product(shape), T(0));
    n->shape = std::move(shape);
    return TensorT(std::move(n));
  }

  static TensorT from(std::vector<size_t> shape, std::vector<T> data) {
    if (shape_product(shape) != data.size())
      throw ShapeError("tensor init: shape " + shape_str(shape) + " does not hold " +
                       std::to_string(data.size()) + " values");
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    return TensorT(std::move(n));
  }

  static TensorT scalar(T v) { return from({}, {v}); }

  // Trainable leaf filled with uniform(lo, hi) draws.
  static TensorT param(std::vector<size_t> shape, Rng& rng, double lo, double hi) {
    auto t = zeros(std::move(shape));
    for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
    t.node()->requires_grad = true;
    return t;
  }

  static TensorT param_const(std::vector<size_t> shape, T fill) {
    auto t = zeros(std::move(shape));
    if (fill != T(0)) std::fill(t.values().begin(), t.values().end(), fill);
    t.node()->requires_grad = true;
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const std::vector<size_t>& shape() const { return node_->shape; }
  size_t size() const { return node_->value.size(); }
  size_t rows() const { return node_->shape.at(0); }
  size_t cols() const { return node_->shape.at(1); }

  std::vector<T>& values() { return node_->value; }
  const std::vector<T>& values() const { return node_->value; }
  T* data() { return node_->value.data(); }
  const T* data() const { return node_->value.data(); }

  std::vector<T>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  T item() const {
    if (size() != 1) throw ShapeError("item(): tensor has " + std::to_string(size()) + " elements");
    return node_->value[0];
  }

  // Value copy detached from the graph.
  TensorT detached() const {
    auto n = std::make_shared<Node<T>>();
    n->shape = node_->shape;
    n->value = node_->value;
    return TensorT(std::move(n));
  }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

  // Reverse pass from a scalar root; seeds d(root)/d(root) = 1.
  void backward() const {
    if (size() != 1) throw ShapeError("backward(): root must be a scalar");
    if (!node_->requires_grad)
      throw ShapeError("backward(): no trainable leaf reaches this value");
    std::vector<Node<T>*> order;
    topo_sort(order);
    node_->ensure_grad();
    node_->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<T>* n = *it;
      if (n->backward_fn) n->backward_fn(*n);
    }
  }

 private:
  explicit TensorT(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  void topo_sort(std::vector<Node<T>*>& order) const {
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node<T>* p = n->parents[next++].get();
        if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
  }

  template <typename U>
  friend TensorT<U> make_op(std::vector<size_t> shape, std::vector<U> value,
                            std::vector<TensorT<U>> parents,
                            std::function<void(Node<U>&)> backward_fn, const char* op);

  std::shared_ptr<Node<T>> node_;
};

// Factory for ops (including fused custom ops outside ops.h). Wires parents
// and the backward closure only while grad recording is enabled and some
// parent needs gradients.
template <typename T>
TensorT<T> make_op(std::vector<size_t> shape, std::vector<T> value, std::vector<TensorT<T>> parents,
                   std::function<void(Node<T>&)> backward_fn, const char* op) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  bool needs = false;
  if (grad_enabled())
    for (const auto& p : parents) needs = needs || p.requires_grad();
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(backward_fn);
  }
  return TensorT<T>(std::move(n));
}

using Tensor32 = TensorT<float>;
using Tensor64 = TensorT<double>;

}  // namespace charlm

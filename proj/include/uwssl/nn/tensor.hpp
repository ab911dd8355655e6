// Copyright 2026 The uwssl Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reverse-mode autodiff over dense double tensors.
//
// A Tensor is a handle to a graph node. Ops record their inputs and a
// backward closure when any input requires a gradient and recording is on.
// Tensor::backward() walks the graph in reverse topological order and then
// releases it, so each forward pass builds a fresh graph.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "uwssl/core/error.hpp"

namespace uwssl::nn {

using Shape = std::vector<std::size_t>;

// 64-byte aligned storage. Vectorized kernels pick their code path from
// pointer alignment; fixing it makes results independent of where the
// allocator happens to place a buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node&)>;

struct Node {
  Shape shape;
  Buffer value;
  Buffer grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  BackwardFn backward;
  const char* op = "leaf";

  Buffer& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

namespace detail {
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode(); }

/// Disables graph recording for its lifetime.
class NoGrad {
 public:
  NoGrad() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGrad() { detail::grad_mode() = prev_; }
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  bool prev_;
};

template <typename Vec>
inline void check_finite(const Vec& v, const char* op, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NonFiniteError(uwssl::detail::concat("non-finite ", what, " produced by ", op));
  }
}

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  template <typename Alloc>
  Tensor(Shape shape, const std::vector<double, Alloc>& values, bool requires_grad = false)
      : Tensor(std::move(shape), Buffer(values.begin(), values.end()), requires_grad) {}

  Tensor(Shape shape, Buffer values, bool requires_grad = false) : node_(std::make_shared<Node>()) {
    require<ShapeError>(numel(shape) == values.size(), "tensor shape ", shape_str(shape), " does not match ",
                        values.size(), " values");
    check_finite(values, "constructor", "value");
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const std::size_t n = numel(shape);
    return Tensor(std::move(shape), Buffer(n, 0.0), requires_grad);
  }
  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    const std::size_t n = numel(shape);
    return Tensor(std::move(shape), Buffer(n, v), requires_grad);
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const {
    require<ShapeError>(i < node_->shape.size(), "dim ", i, " out of range for ", shape_str(node_->shape));
    return node_->shape[i];
  }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  const Buffer& values() const { return node_->value; }
  Buffer& mutable_values() { return node_->value; }
  double item() const {
    require<ShapeError>(size() == 1, "item() on tensor of shape ", shape_str(shape()));
    return node_->value[0];
  }
  double operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool r) { node_->requires_grad = r; }
  bool has_grad() const { return !node_->grad.empty(); }
  const Buffer& grad() const { return node_->grad; }
  Buffer& mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  /// Shares storage with nothing: a new leaf with copied values.
  Tensor detach() const { return Tensor(shape(), values(), false); }

  Node* node() const { return node_.get(); }
  const NodePtr& node_ptr() const { return node_; }

  /// Backpropagates from a scalar (seed 1) or from an explicit seed.
  void backward() {
    require<ShapeError>(size() == 1, "backward() without a seed needs a scalar, got ", shape_str(shape()));
    backward(std::vector<double>{1.0});
  }

  void backward(const std::vector<double>& seed) {
    require<ShapeError>(seed.size() == size(), "backward seed has ", seed.size(), " values, tensor has ", size());
    if (!node_->requires_grad) return;
    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->inputs.size()) {
        Node* child = n->inputs[next++].get();
        if (child->requires_grad && !seen.count(child)) {
          seen.insert(child);
          stack.emplace_back(child, 0);
        }
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    auto& g = node_->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      if (n->backward && !n->grad.empty()) {
        n->backward(*n);
        for (const auto& in : n->inputs) {
          if (in->requires_grad && !in->grad.empty()) check_finite(in->grad, n->op, "gradient");
        }
      }
    }
    // Release the graph; leaves keep their accumulated gradients.
    for (Node* n : order) {
      if (n->backward) {
        n->inputs.clear();
        n->backward = nullptr;
        if (n != node_.get()) n->grad.clear();
      }
    }
  }

 private:
  NodePtr node_;
};

/// Builds an op output. Records the graph only if some input needs a
/// gradient and recording is enabled.
inline Tensor make_result(const char* op, Shape shape, Buffer value, std::vector<Tensor> inputs,
                          BackwardFn backward) {
  check_finite(value, op, "value");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.node_ptr());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

/// Gradient buffer of input i, or nullptr when it needs none.
inline double* input_grad(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  return in.requires_grad ? in.grad_buffer().data() : nullptr;
}

}  // namespace uwssl::nn

/* Copyright 2026 The Sliceformer Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef SLICEFORMER_AUTODIFF_HPP_
#define SLICEFORMER_AUTODIFF_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "sliceformer/tensor.hpp"

namespace sf {

class Graph;

// Handle to one node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  // Gradient of the last backward() w.r.t. this node. Only leaves keep their
  // gradient after backward; intermediate buffers are released as the
  // reverse sweep passes them.
  std::span<const double> grad() const;

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

enum class GradMode { kEnabled, kDisabled };

// Tape of executed operations. Nodes are appended in execution order, so
// every node's inputs precede it and the reverse sweep is a plain backwards
// walk over the record.
class Graph {
 public:
  // Receives the graph and the id of the node whose gradient is being
  // propagated; accumulates into the inputs' gradients via grad_for().
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  explicit Graph(GradMode mode = GradMode::kEnabled) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  GradMode mode() const { return mode_; }

  Var constant(Tensor value);
  // Differentiable leaf owned by the graph.
  Var input(Tensor value);
  // Differentiable leaf aliasing `t`; backward() adds into t.grad(). Binding
  // the same tensor twice returns the same node. `t` must outlive the graph
  // and must not be mutated while the graph is alive.
  Var param(Tensor& t);

  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::span<const double> grad(std::size_t id) const;
  // Zero-filled on first access.
  std::span<double> grad_for(std::size_t id);
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  std::size_t size() const { return nodes_.size(); }

  void backward(Var loss);

 private:
  struct Node {
    Tensor owned;
    Tensor* external = nullptr;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Buffer grad;
  };

  Var push(Node node);

  GradMode mode_;
  bool backward_done_ = false;
  std::deque<Node> nodes_;  // references to values stay valid as the tape grows
  std::unordered_map<const Tensor*, std::size_t> bound_params_;
};

// Populates gradients on every reachable leaf. `loss` must hold one value.
void backward(Var loss);

}  // namespace sf

#endif  // SLICEFORMER_AUTODIFF_HPP_

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

#include "sliceformer/autodiff.hpp"

#include <algorithm>

#include "sliceformer/errors.hpp"

namespace sf {

const Tensor& Var::value() const { return graph_->value(id_); }

bool Var::requires_grad() const { return graph_->requires_grad(id_); }

std::span<const double> Var::grad() const { return graph_->grad(id_); }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Graph::input(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = mode_ == GradMode::kEnabled;
  return push(std::move(n));
}

Var Graph::param(Tensor& t) {
  if (auto it = bound_params_.find(&t); it != bound_params_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.external = &t;
  n.requires_grad = mode_ == GradMode::kEnabled;
  Var v = push(std::move(n));
  bound_params_.emplace(&t, v.id());
  return v;
}

Var Graph::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  for (std::size_t in : inputs) {
    if (in >= nodes_.size()) {
      throw ContractError("operation input " + std::to_string(in) +
                          " does not precede the new node");
    }
    n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  }
  n.requires_grad = n.requires_grad && mode_ == GradMode::kEnabled;
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Tensor& Graph::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external != nullptr ? *n.external : n.owned;
}

std::span<const double> Graph::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (n.external != nullptr) return n.external->grad();
  return n.grad;
}

std::span<double> Graph::grad_for(std::size_t id) {
  Node& n = nodes_[id];
  const std::size_t size = value(id).size();
  if (n.grad.size() != size) n.grad.assign(size, 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) throw ContractError("backward: loss belongs to another graph");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_to_string(loss.shape()));
  }
  if (backward_done_) throw ContractError("backward: graph already differentiated");
  backward_done_ = true;
  if (!nodes_[loss.id()].requires_grad) return;

  grad_for(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      n.backward(*this, id);
      // Interior gradients are dead once propagated.
      Buffer().swap(nodes_[id].grad);
    } else if (n.external != nullptr) {
      std::span<double> dst = n.external->grad();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
    }
  }
}

void backward(Var loss) { loss.graph().backward(loss); }

}  // namespace sf

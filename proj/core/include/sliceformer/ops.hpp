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

#ifndef SLICEFORMER_OPS_HPP_
#define SLICEFORMER_OPS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "sliceformer/autodiff.hpp"

namespace sf {

// GELU, tanh form: 0.5 x (1 + tanh(kGeluSqrt2OverPi (x + kGeluCubic x^3))).
inline constexpr double kGeluSqrt2OverPi = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluCubic = 0.044715;

double gelu_value(double x);
double gelu_derivative(double x);

// In-place stable softmax of one row (max subtracted before exp).
// Throws NumericError on non-finite input.
void softmax_inplace(std::span<double> row);

// Differentiable operations. All inputs must belong to the same graph.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
// x[n x m] + bias[m] broadcast over rows.
Var add_bias(Var x, Var bias);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);
Var reshape(Var a, Shape shape);

Var softmax_rows(Var x);
Var layer_norm(Var x, Var gamma, Var beta, double eps);
Var gelu(Var x);

// Output row r is input row perm[r].
Var permute_rows(Var x, std::span<const std::size_t> perm);
Var embedding_lookup(Var table, std::span<const std::size_t> ids);
// Mean over rows of -log softmax(logits)[target]. A rank-1 logits tensor is a
// batch of one.
Var cross_entropy(Var logits, std::span<const std::size_t> targets);

// Column block [begin, begin + count) of a rank-2 tensor.
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var concat_cols(std::span<const Var> parts);
// Row r of a rank-2 tensor as a rank-1 tensor.
Var select_row(Var x, std::size_t r);
// Stacks equally sized rank-1 tensors into a matrix.
Var stack_rows(std::span<const Var> rows);

// Throws IndexError unless perm is a bijection on {0..n-1}.
void check_permutation(std::span<const std::size_t> perm, std::size_t n);

}  // namespace sf

#endif  // SLICEFORMER_OPS_HPP_

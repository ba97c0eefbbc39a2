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

#ifndef SLICEFORMER_GRADCHECK_HPP_
#define SLICEFORMER_GRADCHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "sliceformer/autodiff.hpp"

namespace sf {

struct GradCheckOptions {
  double step = 1e-5;
  // 0 checks every coordinate; otherwise this many coordinates are sampled
  // uniformly (with replacement) across all tensors.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  // ||analytic - numeric|| / max(||analytic||, ||numeric||), over the checked
  // coordinates. Zero when both vectors vanish.
  double relative_error = 0.0;
  // Largest single-coordinate |analytic - numeric| / max(|analytic|, |numeric|, 1).
  double max_coordinate_error = 0.0;
  std::size_t coordinates = 0;
};

// Builds a scalar loss inside the given graph. Tensors under test must be
// bound with Graph::param so perturbations are seen on every call.
using LossBuilder = std::function<Var(Graph&)>;

// Compares backward() against central finite differences. The tensors in
// `wrt` have their gradients overwritten.
GradCheckReport check_gradients(const LossBuilder& loss, std::span<Tensor* const> wrt,
                                const GradCheckOptions& options = {});

double relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace sf

#endif  // SLICEFORMER_GRADCHECK_HPP_

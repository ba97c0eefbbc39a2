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

// Finite-difference checks for every differentiable op, the attention
// mechanisms, one encoder block and a one-layer model.

#ifndef SLICEFORMER_TOOLS_GRADCHECK_SUITE_HPP_
#define SLICEFORMER_TOOLS_GRADCHECK_SUITE_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sf::cli {

inline constexpr double kOpTolerance = 1e-5;
inline constexpr double kModelTolerance = 1e-4;

struct OpGradResult {
  std::string op;
  double max_error = 0.0;  // worst relative error over all seeds
  double tolerance = 0.0;
  std::size_t seeds = 0;

  bool passed() const { return max_error < tolerance; }
};

// Runs each case for seeds first_seed .. first_seed + seeds - 1.
std::vector<OpGradResult> run_gradcheck_suite(std::size_t seeds, std::uint64_t first_seed = 0);

}  // namespace sf::cli

#endif  // SLICEFORMER_TOOLS_GRADCHECK_SUITE_HPP_

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

#include "sliceformer/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sliceformer/rng.hpp"

namespace sf {

double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  if (denom == 0.0) return std::sqrt(diff) == 0.0 ? 0.0 : INFINITY;
  return std::sqrt(diff) / denom;
}

GradCheckReport check_gradients(const LossBuilder& loss, std::span<Tensor* const> wrt,
                                const GradCheckOptions& options) {
  for (Tensor* t : wrt) t->zero_grad();
  {
    Graph g;
    backward(loss(g));
  }

  struct Coord {
    Tensor* tensor;
    std::size_t index;
  };
  std::vector<Coord> coords;
  if (options.max_coordinates == 0) {
    for (Tensor* t : wrt)
      for (std::size_t i = 0; i < t->size(); ++i) coords.push_back({t, i});
  } else {
    std::size_t total = 0;
    for (Tensor* t : wrt) total += t->size();
    Rng rng(options.seed);
    for (std::size_t k = 0; k < options.max_coordinates && total > 0; ++k) {
      std::size_t flat = rng.below(total);
      for (Tensor* t : wrt) {
        if (flat < t->size()) {
          coords.push_back({t, flat});
          break;
        }
        flat -= t->size();
      }
    }
  }

  auto evaluate = [&loss]() {
    Graph g(GradMode::kDisabled);
    return loss(g).value().item();
  };

  std::vector<double> analytic, numeric;
  GradCheckReport report;
  for (const Coord& c : coords) {
    double& x = c.tensor->data()[c.index];
    const double saved = x;
    x = saved + options.step;
    const double up = evaluate();
    x = saved - options.step;
    const double down = evaluate();
    x = saved;
    const double fd = (up - down) / (2.0 * options.step);
    const double bp = c.tensor->grad()[c.index];
    analytic.push_back(bp);
    numeric.push_back(fd);
    const double scale = std::max({std::abs(bp), std::abs(fd), 1.0});
    report.max_coordinate_error = std::max(report.max_coordinate_error, std::abs(bp - fd) / scale);
  }
  report.coordinates = coords.size();
  report.relative_error = relative_error(analytic, numeric);
  return report;
}

}  // namespace sf

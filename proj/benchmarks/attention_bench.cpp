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

#include <benchmark/benchmark.h>

#include "sliceformer/attention.hpp"
#include "sliceformer/ops.hpp"

namespace {

constexpr std::size_t kInputDim = 16;
constexpr std::size_t kHeadDim = 16;

void BM_SortColumns(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sf::Rng rng(1);
  const sf::Tensor v = sf::random_normal({n, kHeadDim}, rng);
  for (auto _ : state) {
    auto sorted = sf::sort_columns(v, sf::SortStrategy::ascending());
    benchmark::DoNotOptimize(sorted.sorted.data().data());
  }
  state.SetComplexityN(state.range(0));
}

void BM_SliceSortForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sf::Rng rng(2);
  sf::SliceSortParams p = sf::SliceSortParams::random(kInputDim, 1, kHeadDim, true, rng);
  const sf::Tensor x = sf::random_normal({n, kInputDim}, rng);
  for (auto _ : state) {
    sf::Graph g(sf::GradMode::kDisabled);
    auto out = sf::slice_sort_forward(g.input(x.detached()), p, sf::SortStrategy::ascending());
    benchmark::DoNotOptimize(out.output.value().data().data());
  }
  state.SetComplexityN(state.range(0));
}

void BM_SliceSortForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sf::Rng rng(3);
  sf::SliceSortParams p = sf::SliceSortParams::random(kInputDim, 1, kHeadDim, true, rng);
  sf::Tensor x = sf::random_normal({n, kInputDim}, rng);
  for (auto _ : state) {
    sf::Graph g;
    sf::backward(sf::sum(sf::slice_sort_forward(g.param(x), p, sf::SortStrategy::ascending()).output));
  }
  state.SetComplexityN(state.range(0));
}

void BM_MhaForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sf::Rng rng(4);
  sf::MhaParams p = sf::MhaParams::random(kInputDim, 1, kHeadDim, rng);
  const sf::Tensor x = sf::random_normal({n, kInputDim}, rng);
  for (auto _ : state) {
    sf::Graph g(sf::GradMode::kDisabled);
    sf::Var out = sf::mha_forward(g.input(x.detached()), p);
    benchmark::DoNotOptimize(out.value().data().data());
  }
  state.SetComplexityN(state.range(0));
}

void BM_MhaForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sf::Rng rng(5);
  sf::MhaParams p = sf::MhaParams::random(kInputDim, 1, kHeadDim, rng);
  sf::Tensor x = sf::random_normal({n, kInputDim}, rng);
  for (auto _ : state) {
    sf::Graph g;
    sf::backward(sf::sum(sf::mha_forward(g.param(x), p)));
  }
  state.SetComplexityN(state.range(0));
}

}  // namespace

BENCHMARK(BM_SortColumns)->RangeMultiplier(2)->Range(256, 8192)->Complexity(benchmark::oNLogN);
BENCHMARK(BM_SliceSortForward)->RangeMultiplier(2)->Range(256, 8192)->Complexity(benchmark::oNLogN);
BENCHMARK(BM_SliceSortForwardBackward)->RangeMultiplier(2)->Range(256, 8192)->Complexity(benchmark::oNLogN);
BENCHMARK(BM_MhaForward)->RangeMultiplier(2)->Range(256, 2048)->Complexity(benchmark::oNSquared);
BENCHMARK(BM_MhaForwardBackward)->RangeMultiplier(2)->Range(256, 2048)->Complexity(benchmark::oNSquared);

BENCHMARK_MAIN();

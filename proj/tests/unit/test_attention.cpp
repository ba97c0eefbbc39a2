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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sliceformer/attention.hpp"
#include "sliceformer/errors.hpp"
#include "sliceformer/gradcheck.hpp"
#include "sliceformer/ops.hpp"

using namespace sf;

namespace {

// Smallest gap between two values in the same column.
double min_column_gap(const Tensor& v) {
  double gap = INFINITY;
  for (std::size_t c = 0; c < v.cols(); ++c) {
    std::vector<double> col(v.rows());
    for (std::size_t r = 0; r < v.rows(); ++r) col[r] = v.at(r, c);
    std::sort(col.begin(), col.end());
    for (std::size_t r = 1; r < col.size(); ++r) gap = std::min(gap, col[r] - col[r - 1]);
  }
  return gap;
}

Tensor project(const Tensor& x, const Tensor& w) {
  Graph g(GradMode::kDisabled);
  return matmul(g.constant(x.detached()), g.constant(w.detached())).value().detached();
}

Tensor sorted_block(const Tensor& x, SliceSortParams& p, const SortStrategy& s) {
  Graph g(GradMode::kDisabled);
  return slice_sort_forward(g.input(x.detached()), p, s).sorted.value().detached();
}

std::vector<SortStrategy> all_strategies(std::size_t layers) {
  std::vector<SortStrategy> out{SortStrategy::ascending(), SortStrategy::max_exchange()};
  for (std::size_t n = 1; n <= layers; ++n) out.push_back(SortStrategy::interleave(n, layers));
  return out;
}

}  // namespace

TEST_CASE("mha_forward") {
  Rng rng(1);
  SUBCASE("zero query/key maps give uniform attention") {
    MhaParams p = MhaParams::random(3, 1, 2, rng);
    p.w_q[0] = Tensor({3, 2});
    p.w_k[0] = Tensor({3, 2});
    p.w_o = Tensor::identity(2);
    Tensor x = random_normal({4, 3}, rng);
    Graph g;
    Var out = mha_forward(g.input(x.detached()), p);
    const Tensor v = project(x, p.w_v[0]);
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < 4; ++r) mean += v.at(r, c) / 4.0;
      for (std::size_t r = 0; r < 4; ++r) CHECK(out.value().at(r, c) == doctest::Approx(mean).epsilon(1e-13));
    }
  }
  SUBCASE("single row returns V") {
    MhaParams p = MhaParams::random(3, 2, 2, rng);
    p.w_o = Tensor::identity(4);
    Tensor x = random_normal({1, 3}, rng);
    Graph g;
    Var out = mha_forward(g.input(x.detached()), p);
    for (std::size_t m = 0; m < 2; ++m) {
      const Tensor v = project(x, p.w_v[m]);
      for (std::size_t c = 0; c < 2; ++c) CHECK(out.value().at(0, m * 2 + c) == doctest::Approx(v.at(0, c)).epsilon(1e-14));
    }
  }
  SUBCASE("agrees with a dense re-implementation") {
    for (std::size_t heads : {1u, 3u}) {
      MhaParams p = MhaParams::random(4, heads, 2, rng);
      Tensor x = random_normal({3, 4}, rng);
      std::vector<oracle::Matrix> wq, wk, wv;
      for (std::size_t m = 0; m < heads; ++m) {
        wq.push_back(oracle::from_flat(p.w_q[m].data(), 4, 2));
        wk.push_back(oracle::from_flat(p.w_k[m].data(), 4, 2));
        wv.push_back(oracle::from_flat(p.w_v[m].data(), 4, 2));
      }
      const auto expect = oracle::dense_mha(oracle::from_flat(x.data(), 3, 4), wq, wk, wv,
                                            oracle::from_flat(p.w_o.data(), 2 * heads, 2 * heads));
      Graph g;
      Var out = mha_forward(g.input(x.detached()), p);
      for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 2 * heads; ++c) CHECK(std::abs(out.value().at(r, c) - expect[r][c]) < 1e-12);
    }
  }
  SUBCASE("dimension mismatch") {
    MhaParams p = MhaParams::random(3, 1, 2, rng);
    Graph g;
    CHECK_THROWS_AS(mha_forward(g.input(Tensor({2, 5})), p), DimensionError);
  }
  SUBCASE("gradient check") {
    MhaParams p = MhaParams::random(3, 2, 2, rng);
    Tensor x = random_normal({4, 3}, rng);
    std::vector<Tensor*> wrt{&x, &p.w_q[1], &p.w_k[0], &p.w_v[1], &p.w_o};
    auto loss = [&](Graph& g) {
      Var out = mha_forward(g.param(x), p);
      return sum(mul(out, out));
    };
    const GradCheckReport rep = check_gradients(loss, wrt);
    CHECK(rep.relative_error < 1e-6);
  }
}

TEST_CASE("slice_sort_forward examples") {
  SUBCASE("already ascending input keeps identity permutations") {
    SliceSortParams p{2, 1, 2, Tensor::identity(2), std::nullopt};
    Tensor x({3, 2}, {0, 5, 1, 6, 2, 7});
    Graph g;
    SliceSortOutput out = slice_sort_forward(g.input(x.detached()), p, SortStrategy::ascending());
    CHECK(out.sorted.value().to_vector() == x.to_vector());
    for (const auto& perm : out.record->perms)
      for (std::size_t r = 0; r < 3; ++r) CHECK(perm[r] == r);
  }
  SUBCASE("2x2 identity") {
    SliceSortParams p{2, 1, 2, Tensor::identity(2), std::nullopt};
    Graph g;
    SliceSortOutput out = slice_sort_forward(g.input(Tensor::identity(2)), p, SortStrategy::ascending());
    CHECK(out.sorted.value().to_vector() == std::vector<double>{0, 0, 1, 1});
    CHECK(out.output.value().to_vector() == std::vector<double>{0, 0, 1, 1});
  }
  SUBCASE("output projection is applied after sorting") {
    Rng rng(2);
    SliceSortParams p = SliceSortParams::random(3, 2, 2, true, rng);
    Tensor x = random_normal({5, 3}, rng);
    Graph g;
    SliceSortOutput out = slice_sort_forward(g.input(x.detached()), p, SortStrategy::ascending());
    const Tensor expect = project(out.sorted.value(), *p.w_o);
    CHECK(out.output.value().to_vector() == expect.to_vector());
  }
  SUBCASE("dimension mismatch") {
    Rng rng(3);
    SliceSortParams p = SliceSortParams::random(3, 1, 2, true, rng);
    Graph g;
    CHECK_THROWS_AS(slice_sort_forward(g.input(Tensor({2, 4})), p, SortStrategy::ascending()), DimensionError);
  }
}

TEST_CASE("slice_sort_backward") {
  SUBCASE("identity permutations pass the upstream through") {
    PermutationRecord rec{3, {IndexBuffer{0, 1, 2}, IndexBuffer{0, 1, 2}}};
    Tensor up({3, 2}, {1, 2, 3, 4, 5, 6});
    CHECK(slice_sort_backward(up, rec).to_vector() == up.to_vector());
  }
  SUBCASE("swap applied twice restores the upstream") {
    PermutationRecord rec{2, {IndexBuffer{1, 0}}};
    Tensor up({2, 1}, {3, 9});
    const Tensor once = slice_sort_backward(up, rec);
    CHECK(once.to_vector() == std::vector<double>{9, 3});
    CHECK(slice_sort_backward(once, rec).to_vector() == up.to_vector());
  }
  SUBCASE("scatter through the inverse permutation") {
    // sorted[r] = v[perm[r]], so dv[perm[r]] = up[r].
    PermutationRecord rec{3, {IndexBuffer{2, 0, 1}}};
    Tensor up({3, 1}, {10, 20, 30});
    CHECK(slice_sort_backward(up, rec).to_vector() == std::vector<double>{20, 30, 10});
  }
  SUBCASE("contract violations") {
    PermutationRecord dup{2, {IndexBuffer{0, 0}}};
    CHECK_THROWS_AS(slice_sort_backward(Tensor({2, 1}), dup), ContractError);
    PermutationRecord ok{2, {IndexBuffer{0, 1}}};
    CHECK_THROWS_AS(slice_sort_backward(Tensor({3, 1}), ok), ContractError);
    CHECK_THROWS_AS(slice_sort_backward(Tensor({2, 2}), ok), ContractError);
  }
  SUBCASE("end-to-end gradient on random 5x3") {
    for (bool projection : {false, true}) {
      Rng rng(40 + projection);
      SliceSortParams p;
      Tensor x;
      do {
        p = SliceSortParams::random(3, 1, 3, projection, rng);
        x = random_normal({5, 3}, rng);
      } while (min_column_gap(project(x, p.w_v)) < 1e-2);
      for (const SortStrategy& s : all_strategies(2)) {
        std::vector<Tensor*> wrt{&x, &p.w_v};
        if (p.w_o) wrt.push_back(&*p.w_o);
        Tensor weights = random_normal({5, 3}, rng);
        auto loss = [&](Graph& g) {
          return sum(mul(slice_sort_forward(g.param(x), p, s).output, g.constant(weights.detached())));
        };
        CHECK(check_gradients(loss, wrt).relative_error < 1e-6);
        auto plain = [&](Graph& g) { return sum(slice_sort_forward(g.param(x), p, s).output); };
        CHECK(check_gradients(plain, wrt).relative_error < 1e-6);
      }
    }
  }
}

TEST_CASE("sort_direction") {
  SUBCASE("last layer is all ascending") {
    for (std::size_t md : {1u, 4u, 8u, 12u, 64u})
      for (std::size_t i = 1; i <= md; ++i) CHECK(sort_direction(i, 3, 3, md) == SortOrder::kAscending);
  }
  SUBCASE("L=2, n=1, MD=8") {
    CHECK(sort_direction(5, 1, 2, 8) == SortOrder::kDescending);
    CHECK(sort_direction(4, 1, 2, 8) == SortOrder::kAscending);  // sin(pi) = 0
    CHECK(sort_direction(8, 1, 2, 8) == SortOrder::kAscending);  // sin(2 pi) = 0
    CHECK(sort_direction(3, 1, 2, 8) == SortOrder::kAscending);
  }
  SUBCASE("agrees with a direct sine evaluation") {
    for (std::size_t L = 1; L <= 6; ++L)
      for (std::size_t n = 1; n <= L; ++n)
        for (std::size_t md : {1u, 3u, 8u, 10u, 32u, 48u})
          for (std::size_t i = 1; i <= md; ++i) {
            const bool asc = oracle::direct_ascending(i, n, L, md);
            CHECK((sort_direction(i, n, L, md) == SortOrder::kAscending) == asc);
          }
  }
  SUBCASE("out of range") {
    CHECK_THROWS_AS(sort_direction(0, 1, 2, 8), ContractError);
    CHECK_THROWS_AS(sort_direction(9, 1, 2, 8), ContractError);
    CHECK_THROWS_AS(sort_direction(1, 0, 2, 8), ContractError);
    CHECK_THROWS_AS(sort_direction(1, 3, 2, 8), ContractError);
    CHECK_THROWS_AS(SortStrategy::interleave(3, 2).validate(), ContractError);
  }
}

TEST_CASE("max_exchange") {
  auto r = max_exchange(std::vector<double>{3, 7, 2});
  CHECK(r.column == std::vector<double>{7, 3, 2});
  CHECK(r.perm == std::vector<std::size_t>{1, 0, 2});
  r = max_exchange(std::vector<double>{5, 1, 2});
  CHECK(r.column == std::vector<double>{5, 1, 2});
  CHECK(r.perm == std::vector<std::size_t>{0, 1, 2});
  r = max_exchange(std::vector<double>{4, 1, 4});
  CHECK(r.column == std::vector<double>{4, 1, 4});
  CHECK(r.perm == std::vector<std::size_t>{0, 1, 2});
  r = max_exchange(std::vector<double>{1, 4, 4});
  CHECK(r.perm == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("extract_permutation_matrix") {
  PermutationRecord id{2, {IndexBuffer{0, 1}, IndexBuffer{1, 0}}};
  CHECK(extract_permutation_matrix(id, 0).to_vector() == std::vector<double>{1, 0, 0, 1});
  CHECK(extract_permutation_matrix(id, 1).to_vector() == std::vector<double>{0, 1, 1, 0});
  CHECK_THROWS_AS(extract_permutation_matrix(id, 2), IndexError);
}

TEST_CASE("permutation properties hold on 100 random inputs") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.below(12), heads = 1 + rng.below(3), dim = 1 + rng.below(3);
    SliceSortParams p = SliceSortParams::random(3, heads, dim, true, rng);
    Tensor x = random_normal({n, 3}, rng);
    const Tensor v = project(x, p.w_v);
    const std::size_t layers = 1 + rng.below(4);
    for (const SortStrategy& s : all_strategies(layers)) {
      Graph g;
      SliceSortOutput out = slice_sort_forward(g.input(x.detached()), p, s);
      const Tensor& sorted = out.sorted.value();
      const PermutationRecord& rec = *out.record;
      REQUIRE(rec.is_valid());
      REQUIRE(rec.channels() == heads * dim);
      for (std::size_t c = 0; c < rec.channels(); ++c) {
        const Tensor pm = extract_permutation_matrix(rec, c);
        std::size_t nnz = 0;
        for (std::size_t i = 0; i < n; ++i) {
          double row = 0.0, col = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            row += pm.at(i, j);
            col += pm.at(j, i);
            nnz += pm.at(i, j) != 0.0;
          }
          CHECK(row == 1.0);
          CHECK(col == 1.0);
        }
        CHECK(nnz == n);
        // P^T P = I
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < n; ++t) s += pm.at(t, i) * pm.at(t, j);
            CHECK(s == (i == j ? 1.0 : 0.0));
          }
        // Dense P v reproduces the sorted slice.
        std::vector<double> col(n), sorted_col(n);
        for (std::size_t r = 0; r < n; ++r) {
          double s = 0.0;
          for (std::size_t t = 0; t < n; ++t) s += pm.at(r, t) * v.at(t, c);
          CHECK(s == sorted.at(r, c));
          col[r] = v.at(r, c);
          sorted_col[r] = sorted.at(r, c);
        }
        // Multiset preserved.
        std::vector<double> a = col, b = sorted_col;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
        switch (s.variant) {
          case SortVariant::kAscending:
            CHECK(std::is_sorted(sorted_col.begin(), sorted_col.end()));
            break;
          case SortVariant::kOrderInterleave:
            if (sort_direction(c + 1, s.layer, s.total_layers, rec.channels()) == SortOrder::kAscending)
              CHECK(std::is_sorted(sorted_col.begin(), sorted_col.end()));
            else
              CHECK(std::is_sorted(sorted_col.rbegin(), sorted_col.rend()));
            break;
          case SortVariant::kMaxExchange:
            CHECK(sorted_col[0] == *std::max_element(col.begin(), col.end()));
            break;
        }
      }
    }
  }
}

TEST_CASE("sorted block is invariant to shuffling input rows") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.below(10);
    SliceSortParams p = SliceSortParams::random(4, 2, 2, true, rng);
    Tensor x = random_normal({n, 4}, rng);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    Tensor shuffled({n, 4});
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < 4; ++c) shuffled.at(r, c) = x.at(order[r], c);
    for (const SortStrategy& s : {SortStrategy::ascending(), SortStrategy::interleave(1, 3)}) {
      CHECK(sorted_block(x, p, s).to_vector() == sorted_block(shuffled, p, s).to_vector());
    }
  }
}

TEST_CASE("ties keep their original order") {
  SliceSortParams p{1, 1, 1, Tensor::identity(1), std::nullopt};
  Graph g;
  SliceSortOutput out = slice_sort_forward(g.input(Tensor({4, 1}, {2, 1, 2, 1})), p, SortStrategy::ascending());
  CHECK(std::vector<std::size_t>(out.record->perms[0].begin(), out.record->perms[0].end()) ==
        std::vector<std::size_t>{1, 3, 0, 2});
  SliceSortParams desc{1, 1, 2, Tensor({1, 2}, {1, 1}), std::nullopt};
  Graph g2;
  // MD = 2, L = 2, n = 1: channel 2 has sin(pi) = 0 -> ascending; channel 1 sin(pi/2) > 0.
  SliceSortOutput o2 = slice_sort_forward(g2.input(Tensor({3, 1}, {1, 1, 0})), desc, SortStrategy::interleave(1, 2));
  CHECK(o2.sorted.value().to_vector() == std::vector<double>{0, 0, 1, 1, 1, 1});
}

TEST_CASE("matched shapes and parameter counts") {
  Rng rng(8);
  for (std::size_t heads : {1u, 2u, 4u}) {
    MhaParams mha = MhaParams::random(8, heads, 8 / heads, rng);
    SliceSortParams ss = SliceSortParams::random(8, heads, 8 / heads, true, rng);
    Tensor x = random_normal({6, 8}, rng);
    Graph g;
    CHECK(mha_forward(g.input(x.detached()), mha).shape() ==
          slice_sort_forward(g.input(x.detached()), ss, SortStrategy::ascending()).output.shape());
    CHECK(ss.count() < mha.count());
    CHECK(mha.count() == 3 * 8 * 8 + 8 * 8);
    CHECK(ss.count() == 8 * 8 + 8 * 8);
  }
}

TEST_CASE("softmax attention map rows are stochastic") {
  Rng rng(9);
  const Tensor map = softmax_attention_map(random_normal({5, 3}, rng), random_normal({5, 3}, rng));
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 5; ++j) s += map.at(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

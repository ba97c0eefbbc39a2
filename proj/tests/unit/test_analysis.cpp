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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "sliceformer/analysis.hpp"
#include "sliceformer/errors.hpp"

using namespace sf;

namespace {

// Squared singular values via the eigenvalues of A^T A (or A A^T).
std::vector<double> gram_oracle(const Tensor& a) {
  Eigen::MatrixXd m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a.at(i, j);
  const Eigen::MatrixXd gram = a.rows() >= a.cols() ? Eigen::MatrixXd(m.transpose() * m)
                                                    : Eigen::MatrixXd(m * m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  std::vector<double> ev(solver.eigenvalues().data(), solver.eigenvalues().data() + gram.rows());
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

}  // namespace

TEST_CASE("softmax_std_curve") {
  CHECK(softmax_sample_std(std::vector<double>(7, 2.5)) == 0.0);
  CHECK(softmax_sample_std(std::vector<double>{std::log(3.0), 0.0}) == doctest::Approx(0.353553).epsilon(1e-6));
  CHECK(softmax_sample_std(std::vector<double>{std::log(3.0), 0.0}) ==
        doctest::Approx(std::sqrt(0.125)).epsilon(1e-14));
  CHECK(sample_std(std::vector<double>{1, 2, 3, 4}) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));

  const std::vector<std::size_t> sizes{10, 100, 1000, 10000};
  const auto curve = softmax_std_curve(sizes, 100, 3);
  REQUIRE(curve.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(curve[i].n == sizes[i]);
  for (std::size_t i = 1; i < 4; ++i) CHECK(curve[i].mean_std < curve[i - 1].mean_std);
  CHECK(curve[0].mean_std > 10.0 * curve[3].mean_std);

  const auto again = softmax_std_curve(sizes, 100, 3);
  for (std::size_t i = 0; i < 4; ++i) CHECK(again[i].mean_std == curve[i].mean_std);

  const std::vector<std::size_t> bad{1};
  CHECK_THROWS_AS(softmax_std_curve(bad, 10, 1), ContractError);
  CHECK_THROWS_AS(softmax_std_curve(sizes, 0, 1), ContractError);
}

TEST_CASE("singular_spectrum") {
  SUBCASE("identity") {
    for (double s : singular_spectrum(Tensor::identity(5))) CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("diag(3, -2)") {
    const auto s = singular_spectrum(Tensor({2, 2}, {3, 0, 0, -2}));
    REQUIRE(s.size() == 2);
    CHECK(s[0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(s[1] == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("random matrices against the Gram eigenvalues") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(seed);
      const std::size_t rows = 1 + rng.below(9), cols = 1 + rng.below(9);
      const Tensor a = random_normal({rows, cols}, rng);
      const auto s = singular_spectrum(a);
      const auto ev = gram_oracle(a);
      REQUIRE(s.size() == std::min(rows, cols));
      for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s[i] >= 0.0);
        if (i > 0) CHECK(s[i] <= s[i - 1]);
        CHECK(std::abs(s[i] * s[i] - std::max(ev[i], 0.0)) < 1e-9);
      }
    }
  }
  SUBCASE("invariant to row shuffles") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      const Tensor a = random_normal({7, 4}, rng);
      std::vector<std::size_t> order(7);
      std::iota(order.begin(), order.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(order));
      Tensor b({7, 4});
      for (std::size_t r = 0; r < 7; ++r)
        for (std::size_t c = 0; c < 4; ++c) b.at(r, c) = a.at(order[r], c);
      const auto sa = singular_spectrum(a), sb = singular_spectrum(b);
      for (std::size_t i = 0; i < 4; ++i) CHECK(sa[i] == doctest::Approx(sb[i]).epsilon(1e-12));
    }
  }
  SUBCASE("rank-deficient and non-finite input") {
    const auto s = singular_spectrum(Tensor({3, 2}, {1, 2, 2, 4, 3, 6}));
    CHECK(s[0] == doctest::Approx(std::sqrt(70.0)).epsilon(1e-13));
    CHECK(s[1] < 1e-12);
    CHECK_THROWS_AS(singular_spectrum(Tensor({1, 2}, {1.0, INFINITY})), NumericError);
  }
}

TEST_CASE("structure_check") {
  SUBCASE("permutation matrices") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      SliceSortParams p = SliceSortParams::random(3, 1, 2, false, rng);
      const std::size_t n = 2 + rng.below(20);
      Graph g;
      const auto out = slice_sort_forward(g.input(random_normal({n, 3}, rng)), p, SortStrategy::interleave(1, 2));
      for (std::size_t c = 0; c < 2; ++c) {
        const StructureReport r = structure_check(extract_permutation_matrix(*out.record, c), 1e-12);
        CHECK(r == StructureReport{true, true, n, n});
      }
    }
  }
  SUBCASE("uniform matrix") {
    Tensor u({4, 4});
    for (double& v : u.data()) v = 0.25;
    const StructureReport r = structure_check(u, 1e-12);
    CHECK(r.row_stochastic);
    CHECK(r.col_stochastic);
    CHECK(r.nnz == 16);
    CHECK(r.rank == 1);
  }
  SUBCASE("softmax attention map") {
    Rng rng(21);
    const Tensor map = softmax_attention_map(random_normal({8, 4}, rng), random_normal({8, 4}, rng));
    const StructureReport r = structure_check(map, 1e-9);
    CHECK(r.row_stochastic);
    CHECK_FALSE(r.col_stochastic);
    CHECK(r.nnz == 64);
  }
  SUBCASE("non-square input") {
    CHECK_THROWS_AS(structure_check(Tensor({2, 3}), 1e-9), DimensionError);
  }
}

TEST_CASE("bench_attention") {
  BenchOptions opts;
  opts.sizes = {64, 128, 256};
  opts.repeats = 3;
  opts.min_repeat_seconds = 0.002;
  const auto records = bench_attention(opts);
  REQUIRE(records.size() == 6);
  for (const BenchRecord& r : records) {
    CHECK(r.fwd_s > 0.0);
    CHECK(r.fwdbwd_s > 0.0);
    CHECK(r.fwd_spread < 3.0);
    CHECK(r.fwdbwd_spread < 3.0);
    CHECK(r.peak_bytes > 0);
    const std::size_t quadratic = r.n * r.n * sizeof(double);
    if (r.mechanism == AttentionKind::kSliceSort) {
      CHECK(r.largest_allocation < quadratic);
    } else {
      CHECK(r.largest_allocation >= quadratic);
    }
  }
  opts.repeats = 2;
  CHECK_THROWS_AS(bench_attention(opts), ContractError);
}

TEST_CASE("loglog_slope") {
  const std::vector<double> x{1, 2, 4, 8}, y{3, 12, 48, 192};
  CHECK(loglog_slope(x, y) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("spectrum_experiment") {
  EncoderConfig sc;
  sc.layers = 2;
  sc.d_model = 8;
  sc.heads = 2;
  sc.head_dim = 4;
  sc.seq_len = 9;
  EncoderConfig mc = sc;
  mc.attention = AttentionKind::kSoftmaxMha;
  Rng rng(2);
  EncoderParams sp = EncoderParams::init(sc, rng);
  EncoderParams mp = EncoderParams::init(mc, rng);
  const Dataset probe = gen_multiset_majority(1, 4, sc.seq_len - 1, sc.vocab, sc.n_classes);
  const SpectrumComparison cmp = spectrum_experiment(mp, mc, sp, sc, probe);
  REQUIRE(cmp.softmax.size() == 2);
  REQUIRE(cmp.slicesort.size() == 2);
  for (const auto* reports : {&cmp.softmax, &cmp.slicesort}) {
    for (std::size_t l = 0; l < 2; ++l) {
      const SpectrumReport& r = (*reports)[l];
      CHECK(r.layer == l + 1);
      REQUIRE(r.singular_values.size() == 8);
      CHECK(r.singular_values[0] == 1.0);
      CHECK(std::is_sorted(r.singular_values.rbegin(), r.singular_values.rend()));
    }
  }
  CHECK(cmp.softmax[0].mechanism == AttentionKind::kSoftmaxMha);
  CHECK(cmp.slicesort[0].mechanism == AttentionKind::kSliceSort);
  CHECK(cmp.slicesort_final_area == doctest::Approx(spectrum_area(cmp.slicesort[1].singular_values)));
  CHECK(cmp.slicesort_decays_slower == (cmp.slicesort_final_area >= cmp.softmax_final_area));
}

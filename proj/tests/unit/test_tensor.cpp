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

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "sliceformer/errors.hpp"
#include "sliceformer/ops.hpp"
#include "sliceformer/rng.hpp"

using namespace sf;

namespace {

using OpFn = std::function<Var(Graph&, std::vector<Var>&)>;

// Backprop vs. finite differences of sum(op(inputs) * W) for a fixed random W.
double op_grad_error(std::vector<Tensor>& inputs, const OpFn& op, std::uint64_t seed,
                     double h = 1e-5) {
  Rng rng(seed ^ 0xABCDEFull);
  Tensor weights;
  auto loss = [&](Graph& g) {
    std::vector<Var> vars;
    for (Tensor& t : inputs) vars.push_back(g.param(t));
    Var out = op(g, vars);
    if (weights.empty()) weights = random_normal(out.shape(), rng);
    return sum(mul(out, g.constant(weights.detached())));
  };
  for (Tensor& t : inputs) t.zero_grad();
  {
    Graph g;
    backward(loss(g));
  }
  std::vector<double> analytic, numeric;
  for (Tensor& t : inputs) {
    analytic.insert(analytic.end(), t.grad().begin(), t.grad().end());
    auto fd = oracle::numeric_gradient(
        [&] {
          Graph g(GradMode::kDisabled);
          return loss(g).value().item();
        },
        t.data(), h);
    numeric.insert(numeric.end(), fd.begin(), fd.end());
  }
  return oracle::norm_relative_error(analytic, numeric);
}

Tensor randn(Shape s, Rng& rng) { return random_normal(std::move(s), rng); }

}  // namespace

TEST_CASE("tensor enforces the shape/data invariant") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DimensionError);
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  t.at(1, 2) = 5.0;
  CHECK(t.data()[5] == 5.0);  // row-major
  CHECK(Tensor::scalar(3.0).item() == 3.0);
  CHECK(t.grad().size() == t.size());
}

TEST_CASE("graph records inputs before outputs") {
  Graph g;
  Var a = g.input(Tensor({1}, {1.0}));
  CHECK_THROWS_AS(g.record(Tensor({1}), {a.id() + 5}, nullptr), ContractError);
  Var b = scale(a, 2.0);
  CHECK(g.inputs(b.id()).front() < b.id());
}

TEST_CASE("matmul") {
  Graph g;
  SUBCASE("identity") {
    Rng rng(1);
    Var a = g.constant(randn({3, 4}, rng));
    Var c = matmul(a, g.constant(Tensor::identity(4)));
    CHECK(c.value().to_vector() == a.value().to_vector());
  }
  SUBCASE("hand example") {
    Var a = g.constant(Tensor({2, 2}, {1, 2, 3, 4}));
    Var b = g.constant(Tensor({2, 1}, {5, 6}));
    CHECK(matmul(a, b).value().to_vector() == std::vector<double>{17, 39});
  }
  SUBCASE("shape mismatch names both shapes") {
    Var a = g.constant(Tensor({2, 3}));
    Var b = g.constant(Tensor({2, 3}));
    try {
      matmul(a, b);
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2x3]") != std::string::npos);
      CHECK(msg.find("and [2x3]") != std::string::npos);
    }
  }
}

TEST_CASE("gradient of sum(A B) w.r.t. A matches finite differences") {
  Rng rng(7);
  Tensor a = randn({3, 4}, rng), b = randn({4, 2}, rng);
  a.zero_grad();
  {
    Graph g;
    backward(sum(matmul(g.param(a), g.constant(b.detached()))));
  }
  const auto fd = oracle::numeric_gradient(
      [&] {
        Graph g(GradMode::kDisabled);
        return sum(matmul(g.param(a), g.constant(b.detached()))).value().item();
      },
      a.data());
  CHECK(oracle::norm_relative_error(a.grad(), fd) < 1e-6);
}

TEST_CASE("softmax_rows") {
  Graph g;
  SUBCASE("uniform row") {
    Var p = softmax_rows(g.constant(Tensor({1, 4})));
    for (double v : p.value().data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("analytic row") {
    Var p = softmax_rows(g.constant(Tensor({1, 2}, {std::log(3.0), 0.0})));
    CHECK(p.value()[0] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(p.value()[1] == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("shift invariance") {
    Rng rng(3);
    Tensor x = randn({3, 5}, rng);
    Tensor shifted = x.detached();
    for (double& v : shifted.data()) v += 17.5;
    Var a = softmax_rows(g.constant(std::move(x)));
    Var b = softmax_rows(g.constant(std::move(shifted)));
    for (std::size_t i = 0; i < a.value().size(); ++i) {
      CHECK(a.value()[i] == doctest::Approx(b.value()[i]).epsilon(1e-12));
    }
  }
  SUBCASE("non-finite input") {
    CHECK_THROWS_AS(softmax_rows(g.constant(Tensor({1, 2}, {NAN, 0.0}))), NumericError);
  }
}

TEST_CASE("softmax rows sum to one within 1e-12") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.below(6), m = 1 + rng.below(40);
    Tensor x = random_normal({n, m}, rng, 1.0 + 10.0 * rng.uniform());
    Graph g;
    Var p = softmax_rows(g.constant(std::move(x)));
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        CHECK(p.value().at(i, j) >= 0.0);
        s += p.value().at(i, j);
      }
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("layer_norm") {
  Graph g;
  Var gamma = g.constant(Tensor({2}, {1.0, 1.0}));
  Var beta = g.constant(Tensor({2}));
  SUBCASE("constant row normalizes to zero") {
    Var y = layer_norm(g.constant(Tensor({1, 2}, {4.0, 4.0})), gamma, beta, 1e-5);
    CHECK(y.value()[0] == 0.0);
    CHECK(y.value()[1] == 0.0);
  }
  SUBCASE("row [1, 3]") {
    Var y = layer_norm(g.constant(Tensor({1, 2}, {1.0, 3.0})), gamma, beta, 1e-12);
    CHECK(y.value()[0] == doctest::Approx(-1.0).epsilon(1e-10));
    CHECK(y.value()[1] == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("backward on random 2x8") {
    Rng rng(11);
    std::vector<Tensor> in{randn({2, 8}, rng), randn({8}, rng), randn({8}, rng)};
    const double err = op_grad_error(in, [](Graph&, std::vector<Var>& v) {
      return layer_norm(v[0], v[1], v[2], 1e-5);
    }, 11);
    CHECK(err < 1e-5);
  }
}

TEST_CASE("gelu") {
  CHECK(gelu_value(0.0) == 0.0);
  CHECK(std::abs(gelu_value(10.0) - 10.0) < 1e-6);
  std::vector<double> x{0.5};
  const auto fd = oracle::numeric_gradient([&] { return gelu_value(x[0]); }, x);
  CHECK(std::abs(gelu_derivative(0.5) - fd[0]) < 1e-6);

  Tensor t({1}, {0.5});
  t.zero_grad();
  {
    Graph g;
    backward(sum(gelu(g.param(t))));
  }
  CHECK(std::abs(t.grad()[0] - fd[0]) < 1e-6);
}

TEST_CASE("permute_rows") {
  Rng rng(5);
  SUBCASE("identity") {
    Tensor x = randn({3, 2}, rng);
    const std::vector<std::size_t> id{0, 1, 2};
    x.zero_grad();
    Graph g;
    Var y = permute_rows(g.param(x), id);
    CHECK(y.value().to_vector() == x.to_vector());
    Tensor up = randn({3, 2}, rng);
    backward(sum(mul(y, g.constant(up.detached()))));
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == up.to_vector());
  }
  SUBCASE("swap is an involution") {
    Graph g;
    Var x = g.constant(Tensor({2, 2}, {1, 2, 3, 4}));
    const std::vector<std::size_t> swap{1, 0};
    Var once = permute_rows(x, swap);
    CHECK(once.value().to_vector() == std::vector<double>{3, 4, 1, 2});
    CHECK(permute_rows(once, swap).value().to_vector() == x.value().to_vector());
  }
  SUBCASE("gradient check, random permutation of 5 rows") {
    std::vector<std::size_t> p(5);
    std::iota(p.begin(), p.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(p));
    std::vector<Tensor> in{randn({5, 3}, rng)};
    const double err = op_grad_error(in, [&](Graph&, std::vector<Var>& v) {
      return permute_rows(v[0], p);
    }, 5);
    CHECK(err < 1e-8);
  }
  SUBCASE("non-bijective permutation") {
    Graph g;
    Var x = g.constant(Tensor({2, 2}));
    const std::vector<std::size_t> bad{0, 0};
    CHECK_THROWS_AS(permute_rows(x, bad), IndexError);
  }
}

TEST_CASE("embedding_lookup") {
  Tensor table({4, 3}, {0, 1, 2, 10, 11, 12, 20, 21, 22, 30, 31, 32});
  SUBCASE("first row") {
    Graph g;
    const std::vector<std::size_t> ids{0};
    CHECK(embedding_lookup(g.param(table), ids).value().to_vector() == std::vector<double>{0, 1, 2});
  }
  SUBCASE("repeated ids accumulate") {
    table.zero_grad();
    Graph g;
    const std::vector<std::size_t> ids{2, 2};
    backward(sum(embedding_lookup(g.param(table), ids)));
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 3; ++c) CHECK(table.grad()[r * 3 + c] == (r == 2 ? 2.0 : 0.0));
  }
  SUBCASE("empty ids") {
    Graph g;
    Var e = embedding_lookup(g.param(table), std::vector<std::size_t>{});
    CHECK(e.shape() == Shape{0, 3});
  }
  SUBCASE("out of range") {
    Graph g;
    CHECK_THROWS_AS(embedding_lookup(g.param(table), std::vector<std::size_t>{4}), IndexError);
  }
}

TEST_CASE("cross_entropy") {
  Graph g;
  SUBCASE("two equal logits") {
    Var l = cross_entropy(g.constant(Tensor({1, 2}, {0.0, 0.0})), std::vector<std::size_t>{0});
    CHECK(l.value().item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(l.value().item() == doctest::Approx(0.693147).epsilon(1e-6));
  }
  SUBCASE("large logits do not overflow") {
    Var l = cross_entropy(g.constant(Tensor({1, 2}, {1000.0, -1000.0})), std::vector<std::size_t>{0});
    CHECK(std::abs(l.value().item()) < 1e-9);
  }
  SUBCASE("gradient on random 3x5") {
    Rng rng(13);
    std::vector<Tensor> in{randn({3, 5}, rng)};
    const std::vector<std::size_t> targets{4, 0, 2};
    const double err = op_grad_error(in, [&](Graph&, std::vector<Var>& v) {
      return cross_entropy(v[0], targets);
    }, 13);
    CHECK(err < 1e-5);
  }
  SUBCASE("target out of range") {
    CHECK_THROWS_AS(cross_entropy(g.constant(Tensor({1, 2})), std::vector<std::size_t>{2}), IndexError);
  }
}

TEST_CASE("backward") {
  Rng rng(17);
  SUBCASE("sum gives ones") {
    Tensor x = randn({3, 4}, rng);
    x.zero_grad();
    Graph g;
    backward(sum(g.param(x)));
    for (double v : x.grad()) CHECK(v == 1.0);
  }
  SUBCASE("sum(X W) gives 1 W^T") {
    Tensor x = randn({2, 3}, rng), w = randn({3, 4}, rng);
    x.zero_grad();
    Graph g;
    backward(sum(matmul(g.param(x), g.constant(w.detached()))));
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t t = 0; t < 3; ++t) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < 4; ++j) row_sum += w.at(t, j);
        CHECK(x.grad()[i * 3 + t] == doctest::Approx(row_sum).epsilon(1e-14));
      }
    }
  }
  SUBCASE("a leaf reused by two branches gets both contributions") {
    Tensor x = randn({2, 2}, rng);
    x.zero_grad();
    {
      Graph g;
      Var v = g.param(x);
      backward(add(sum(scale(v, 3.0)), sum(mul(v, v))));
    }
    // d/dx [3 x + x^2] = 3 + 2x
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(x.grad()[i] == doctest::Approx(3.0 + 2.0 * x[i]).epsilon(1e-14));
    }
  }
  SUBCASE("gradients accumulate until zeroed") {
    Tensor x = randn({2}, rng);
    x.zero_grad();
    for (int k = 0; k < 2; ++k) {
      Graph g;
      backward(sum(g.param(x)));
    }
    CHECK(x.grad()[0] == 2.0);
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
  }
  SUBCASE("non-scalar loss") {
    Graph g;
    Var x = g.input(randn({2, 2}, rng));
    CHECK_THROWS_AS(backward(x), ContractError);
  }
}

TEST_CASE("every differentiable op passes finite differences on 100 seeds") {
  struct Case {
    const char* name;
    std::function<std::vector<Tensor>(Rng&)> inputs;
    OpFn op;
  };
  const std::vector<Case> cases{
      {"matmul", [](Rng& r) { return std::vector<Tensor>{randn({3, 4}, r), randn({4, 2}, r)}; },
       [](Graph&, std::vector<Var>& v) { return matmul(v[0], v[1]); }},
      {"transpose", [](Rng& r) { return std::vector<Tensor>{randn({3, 2}, r)}; },
       [](Graph&, std::vector<Var>& v) { return transpose(v[0]); }},
      {"add_bias", [](Rng& r) { return std::vector<Tensor>{randn({3, 4}, r), randn({4}, r)}; },
       [](Graph&, std::vector<Var>& v) { return add_bias(v[0], v[1]); }},
      {"softmax_rows", [](Rng& r) { return std::vector<Tensor>{randn({3, 5}, r)}; },
       [](Graph&, std::vector<Var>& v) { return softmax_rows(v[0]); }},
      {"layer_norm",
       [](Rng& r) { return std::vector<Tensor>{randn({3, 6}, r), randn({6}, r), randn({6}, r)}; },
       [](Graph&, std::vector<Var>& v) { return layer_norm(v[0], v[1], v[2], 1e-5); }},
      {"gelu", [](Rng& r) { return std::vector<Tensor>{randn({4, 3}, r)}; },
       [](Graph&, std::vector<Var>& v) { return gelu(v[0]); }},
      {"cross_entropy", [](Rng& r) { return std::vector<Tensor>{randn({3, 5}, r)}; },
       [](Graph&, std::vector<Var>& v) {
         return cross_entropy(v[0], std::vector<std::size_t>{1, 4, 0});
       }},
      {"embedding_lookup", [](Rng& r) { return std::vector<Tensor>{randn({5, 3}, r)}; },
       [](Graph&, std::vector<Var>& v) {
         return embedding_lookup(v[0], std::vector<std::size_t>{3, 0, 3, 4});
       }},
      {"concat_slice", [](Rng& r) { return std::vector<Tensor>{randn({3, 2}, r), randn({3, 3}, r)}; },
       [](Graph&, std::vector<Var>& v) {
         std::vector<Var> parts{v[0], v[1]};
         return slice_cols(concat_cols(parts), 1, 3);
       }},
  };
  for (const Case& c : cases) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      std::vector<Tensor> in = c.inputs(rng);
      worst = std::max(worst, op_grad_error(in, c.op, seed));
    }
    INFO(c.name);
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("forward evaluation is bitwise deterministic") {
  auto run = [] {
    Rng rng(99);
    Graph g;
    Var x = g.input(randn({4, 6}, rng));
    Var w = g.input(randn({6, 6}, rng));
    Var y = gelu(softmax_rows(matmul(x, w)));
    return y.value().to_vector();
  };
  CHECK(run() == run());
}

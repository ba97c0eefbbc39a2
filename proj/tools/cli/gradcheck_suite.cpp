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

#include "cli/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sliceformer/attention.hpp"
#include "sliceformer/encoder.hpp"
#include "sliceformer/gradcheck.hpp"
#include "sliceformer/ops.hpp"
#include "sliceformer/rng.hpp"

namespace sf::cli {
namespace {

// Sort-based ops are only differentiable away from ties; inputs whose
// projected columns come closer than this are redrawn.
constexpr double kMinSortGap = 1e-3;
constexpr int kMaxRedraws = 1000;

using OpFn = std::function<Var(std::vector<Var>&)>;

double min_column_gap(const Tensor& v) {
  double gap = INFINITY;
  std::vector<double> col(v.rows());
  for (std::size_t c = 0; c < v.cols(); ++c) {
    for (std::size_t r = 0; r < v.rows(); ++r) col[r] = v.at(r, c);
    std::sort(col.begin(), col.end());
    for (std::size_t r = 1; r < col.size(); ++r) gap = std::min(gap, col[r] - col[r - 1]);
  }
  return gap;
}

// Relative error of d/d(inputs) sum(op(inputs) * W) for a random fixed W.
double weighted_error(std::vector<Tensor>& inputs, const OpFn& op, Rng& rng) {
  Tensor weights;
  LossBuilder loss = [&](Graph& g) {
    std::vector<Var> vars;
    for (Tensor& t : inputs) vars.push_back(g.param(t));
    Var out = op(vars);
    if (weights.empty()) weights = random_normal(out.shape(), rng);
    return sum(mul(out, g.constant(weights.detached())));
  };
  std::vector<Tensor*> wrt;
  for (Tensor& t : inputs) wrt.push_back(&t);
  return check_gradients(loss, wrt).relative_error;
}

struct Case {
  std::string name;
  double tolerance;
  std::function<double(Rng&)> run;
};

Case op_case(std::string name, std::vector<Shape> shapes, OpFn op) {
  return {std::move(name), kOpTolerance, [shapes = std::move(shapes), op = std::move(op)](Rng& rng) {
            std::vector<Tensor> inputs;
            for (const Shape& s : shapes) inputs.push_back(random_normal(s, rng));
            return weighted_error(inputs, op, rng);
          }};
}

Case slice_sort_case(std::string name, SortStrategy strategy, bool projection) {
  return {std::move(name), kOpTolerance, [strategy, projection](Rng& rng) {
            SliceSortParams p;
            Tensor x;
            for (int k = 0; k < kMaxRedraws; ++k) {
              p = SliceSortParams::random(3, 2, 2, projection, rng);
              x = random_normal({5, 3}, rng);
              Graph g(GradMode::kDisabled);
              if (min_column_gap(matmul(g.input(x.detached()), g.input(p.w_v.detached())).value()) >=
                  kMinSortGap)
                break;
            }
            std::vector<Tensor*> wrt{&x, &p.w_v};
            if (p.w_o) wrt.push_back(&*p.w_o);
            Tensor weights = random_normal({5, 4}, rng);
            LossBuilder loss = [&](Graph& g) {
              return sum(mul(slice_sort_forward(g.param(x), p, strategy).output,
                             g.constant(weights.detached())));
            };
            return check_gradients(loss, wrt).relative_error;
          }};
}

// Smallest gap of any sorted block seen in one forward pass.
double trace_gap(const ForwardTrace& trace) {
  double gap = INFINITY;
  for (const Var& v : trace.sorted_values) gap = std::min(gap, min_column_gap(v.value()));
  return gap;
}

EncoderConfig model_config(AttentionKind kind) {
  EncoderConfig c;
  c.layers = 1;
  c.d_model = 4;
  c.heads = 2;
  c.head_dim = 2;
  c.seq_len = 4;
  c.vocab = 5;
  c.n_classes = 3;
  c.attention = kind;
  return c;
}

Case block_case(AttentionKind kind) {
  return {"encoder_block/" + to_string(kind), kOpTolerance, [kind](Rng& rng) {
            EncoderConfig c = model_config(kind);
            c.d_model = 6;
            c.head_dim = 3;
            EncoderParams params;
            Tensor x;
            for (int k = 0; k < kMaxRedraws; ++k) {
              params = EncoderParams::init(c, rng);
              x = random_normal({4, 6}, rng);
              Graph g(GradMode::kDisabled);
              ForwardTrace trace;
              encoder_block_forward(g.input(x.detached()), params.layers[0], c, 1, &trace);
              if (trace_gap(trace) >= kMinSortGap) break;
            }
            std::vector<Tensor*> wrt{&x};
            for (auto& [name, t] : params.named())
              if (name.rfind("layer1.", 0) == 0) wrt.push_back(t);
            Tensor weights = random_normal({4, 6}, rng);
            LossBuilder loss = [&](Graph& g) {
              Var y = encoder_block_forward(g.param(x), params.layers[0], c, 1);
              return sum(mul(y, g.constant(weights.detached())));
            };
            return check_gradients(loss, wrt).relative_error;
          }};
}

Case model_case(AttentionKind kind) {
  return {"model/" + to_string(kind), kModelTolerance, [kind](Rng& rng) {
            const EncoderConfig c = model_config(kind);
            EncoderParams params;
            std::vector<std::size_t> ids(c.seq_len - 1);
            for (int k = 0; k < kMaxRedraws; ++k) {
              params = EncoderParams::init(c, rng);
              for (auto& t : ids) t = 1 + rng.below(c.vocab - 1);
              Graph g(GradMode::kDisabled);
              ForwardTrace trace;
              model_forward(g, ids, params, c, &trace);
              if (trace_gap(trace) >= kMinSortGap) break;
            }
            const std::size_t target = rng.below(c.n_classes);
            std::vector<Tensor*> wrt;
            for (auto& [name, t] : params.named()) wrt.push_back(t);
            LossBuilder loss = [&](Graph& g) {
              Var logits = reshape(model_forward(g, ids, params, c), {1, c.n_classes});
              return cross_entropy(logits, std::vector<std::size_t>{target});
            };
            return check_gradients(loss, wrt).relative_error;
          }};
}

std::vector<Case> all_cases() {
  std::vector<Case> cases;
  cases.push_back(op_case("matmul", {{3, 4}, {4, 2}}, [](auto& v) { return matmul(v[0], v[1]); }));
  cases.push_back(op_case("transpose", {{3, 2}}, [](auto& v) { return transpose(v[0]); }));
  cases.push_back(op_case("add", {{2, 3}, {2, 3}}, [](auto& v) { return add(v[0], v[1]); }));
  cases.push_back(op_case("add_bias", {{3, 4}, {4}}, [](auto& v) { return add_bias(v[0], v[1]); }));
  cases.push_back(op_case("mul", {{2, 3}, {2, 3}}, [](auto& v) { return mul(v[0], v[1]); }));
  cases.push_back(op_case("scale", {{2, 3}}, [](auto& v) { return scale(v[0], -1.7); }));
  cases.push_back(op_case("sum", {{2, 3}}, [](auto& v) { return sum(v[0]); }));
  cases.push_back(op_case("reshape", {{2, 3}}, [](auto& v) { return reshape(v[0], {3, 2}); }));
  cases.push_back(op_case("softmax_rows", {{3, 5}}, [](auto& v) { return softmax_rows(v[0]); }));
  cases.push_back(op_case("layer_norm", {{3, 6}, {6}, {6}},
                          [](auto& v) { return layer_norm(v[0], v[1], v[2], 1e-5); }));
  cases.push_back(op_case("gelu", {{4, 3}}, [](auto& v) { return gelu(v[0]); }));
  cases.push_back(op_case("permute_rows", {{5, 3}}, [](auto& v) {
    return permute_rows(v[0], std::vector<std::size_t>{3, 0, 4, 1, 2});
  }));
  cases.push_back(op_case("embedding_lookup", {{5, 3}}, [](auto& v) {
    return embedding_lookup(v[0], std::vector<std::size_t>{3, 0, 3, 4});
  }));
  cases.push_back(op_case("cross_entropy", {{3, 5}}, [](auto& v) {
    return cross_entropy(v[0], std::vector<std::size_t>{1, 4, 0});
  }));
  cases.push_back(op_case("slice_cols", {{3, 5}}, [](auto& v) { return slice_cols(v[0], 1, 4); }));
  cases.push_back(op_case("concat_cols", {{3, 2}, {3, 3}}, [](auto& v) {
    std::vector<Var> parts{v[0], v[1]};
    return concat_cols(parts);
  }));
  cases.push_back(op_case("select_row", {{4, 3}}, [](auto& v) { return select_row(v[0], 2); }));
  cases.push_back(op_case("stack_rows", {{3}, {3}}, [](auto& v) {
    std::vector<Var> rows{v[0], v[1], v[0]};
    return stack_rows(rows);
  }));
  cases.push_back({"mha_forward", kOpTolerance, [](Rng& rng) {
                     MhaParams p = MhaParams::random(3, 2, 2, rng);
                     Tensor x = random_normal({4, 3}, rng);
                     std::vector<Tensor*> wrt{&x};
                     for (auto& [name, t] : p.named("")) wrt.push_back(t);
                     Tensor weights = random_normal({4, 4}, rng);
                     LossBuilder loss = [&](Graph& g) {
                       return sum(mul(mha_forward(g.param(x), p), g.constant(weights.detached())));
                     };
                     return check_gradients(loss, wrt).relative_error;
                   }});
  cases.push_back(slice_sort_case("slice_sort/ascending", SortStrategy::ascending(), true));
  cases.push_back(slice_sort_case("slice_sort/interleave", SortStrategy::interleave(1, 2), true));
  cases.push_back(slice_sort_case("slice_sort/maxexchange", SortStrategy::max_exchange(), true));
  cases.push_back(slice_sort_case("slice_sort/bare", SortStrategy::ascending(), false));
  cases.push_back(block_case(AttentionKind::kSoftmaxMha));
  cases.push_back(block_case(AttentionKind::kSliceSort));
  cases.push_back(model_case(AttentionKind::kSoftmaxMha));
  cases.push_back(model_case(AttentionKind::kSliceSort));
  return cases;
}

}  // namespace

std::vector<OpGradResult> run_gradcheck_suite(std::size_t seeds, std::uint64_t first_seed) {
  std::vector<OpGradResult> results;
  for (const Case& c : all_cases()) {
    OpGradResult r{c.name, 0.0, c.tolerance, seeds};
    for (std::size_t s = 0; s < seeds; ++s) {
      Rng rng(first_seed + s);
      r.max_error = std::max(r.max_error, c.run(rng));
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace sf::cli

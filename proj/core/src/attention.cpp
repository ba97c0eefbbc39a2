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

#include "sliceformer/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sliceformer/errors.hpp"
#include "sliceformer/ops.hpp"

namespace sf {
namespace {

using KeyedIndex = std::pair<double, std::size_t>;
using KeyedBuffer = std::vector<KeyedIndex, TrackingAllocator<KeyedIndex>>;

void fill_permutation(const Tensor& v, std::size_t col, SortOrder order, KeyedBuffer& scratch,
                      IndexBuffer& perm) {
  const std::size_t n = v.rows();
  scratch.resize(n);
  const double sign = order == SortOrder::kAscending ? 1.0 : -1.0;
  for (std::size_t r = 0; r < n; ++r) scratch[r] = {sign * v.at(r, col), r};
  // (key, index) ordering is a stable sort by key; std::sort needs no heap.
  std::sort(scratch.begin(), scratch.end());
  perm.resize(n);
  for (std::size_t r = 0; r < n; ++r) perm[r] = scratch[r].second;
}

void max_exchange_permutation(const Tensor& v, std::size_t col, IndexBuffer& perm) {
  const std::size_t n = v.rows();
  perm.resize(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::size_t best = 0;
  for (std::size_t r = 1; r < n; ++r) {
    if (v.at(r, col) > v.at(best, col)) best = r;
  }
  std::swap(perm[0], perm[best]);
}

bool is_bijection(const IndexBuffer& perm, std::size_t n) {
  if (perm.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (std::size_t p : perm) {
    if (p >= n || seen[p]) return false;
    seen[p] = true;
  }
  return true;
}

Tensor init_weight(std::size_t rows, std::size_t cols, Rng& rng) {
  return random_normal({rows, cols}, rng, 1.0 / std::sqrt(static_cast<double>(rows)));
}

}  // namespace

std::string to_string(SortVariant variant) {
  switch (variant) {
    case SortVariant::kAscending:
      return "ascending";
    case SortVariant::kOrderInterleave:
      return "interleave";
    case SortVariant::kMaxExchange:
      return "maxexchange";
  }
  return "unknown";
}

void SortStrategy::validate() const {
  if (variant != SortVariant::kOrderInterleave) return;
  if (layer < 1 || layer > total_layers) {
    throw ContractError("order-interleave needs 1 <= layer <= total_layers, got layer " +
                        std::to_string(layer) + " of " + std::to_string(total_layers));
  }
}

SortOrder sort_direction(std::size_t channel, std::size_t layer, std::size_t total_layers,
                         std::size_t channels) {
  if (channels == 0 || channel < 1 || channel > channels || layer < 1 || layer > total_layers) {
    throw ContractError("sort_direction: need 1 <= i <= MD and 1 <= n <= L, got i=" +
                        std::to_string(channel) + " MD=" + std::to_string(channels) +
                        " n=" + std::to_string(layer) + " L=" + std::to_string(total_layers));
  }
  // psi = sin(pi * t / MD) with t = 2^(L-n) * i reduced mod 2 MD.
  const std::size_t period = 2 * channels;
  std::size_t t = channel % period;
  for (std::size_t k = 0; k < total_layers - layer; ++k) t = (2 * t) % period;
  // t in (MD, 2MD) puts the phase in (pi, 2pi), where sine is negative.
  return t > channels ? SortOrder::kDescending : SortOrder::kAscending;
}

MaxExchangeResult max_exchange(std::span<const double> v) {
  if (v.empty()) throw ContractError("max_exchange: empty column");
  MaxExchangeResult out;
  out.perm.resize(v.size());
  std::iota(out.perm.begin(), out.perm.end(), std::size_t{0});
  const std::size_t best =
      static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
  std::swap(out.perm[0], out.perm[best]);
  out.column.resize(v.size());
  for (std::size_t r = 0; r < v.size(); ++r) out.column[r] = v[out.perm[r]];
  return out;
}

bool PermutationRecord::is_valid() const {
  return std::all_of(perms.begin(), perms.end(),
                     [this](const IndexBuffer& p) { return is_bijection(p, length); });
}

SortedColumns sort_columns(const Tensor& v, const SortStrategy& strategy) {
  if (v.rank() != 2) {
    throw DimensionError("sort_columns: expected a matrix, got " + shape_to_string(v.shape()));
  }
  strategy.validate();
  const std::size_t n = v.rows(), channels = v.cols();
  if (n == 0) throw ContractError("sort_columns: need at least one row");

  SortedColumns out{Tensor(v.shape()), PermutationRecord{n, std::vector<IndexBuffer>(channels)}};
  KeyedBuffer scratch;
  for (std::size_t c = 0; c < channels; ++c) {
    IndexBuffer& perm = out.record.perms[c];
    switch (strategy.variant) {
      case SortVariant::kAscending:
        fill_permutation(v, c, SortOrder::kAscending, scratch, perm);
        break;
      case SortVariant::kOrderInterleave:
        fill_permutation(
            v, c, sort_direction(c + 1, strategy.layer, strategy.total_layers, channels), scratch,
            perm);
        break;
      case SortVariant::kMaxExchange:
        max_exchange_permutation(v, c, perm);
        break;
    }
    for (std::size_t r = 0; r < n; ++r) out.sorted.at(r, c) = v.at(perm[r], c);
  }
  return out;
}

Tensor slice_sort_backward(const Tensor& upstream, const PermutationRecord& record) {
  if (upstream.rank() != 2 || upstream.rows() != record.length ||
      upstream.cols() != record.channels()) {
    throw ContractError("slice_sort_backward: upstream " + shape_to_string(upstream.shape()) +
                        " does not match record of " + std::to_string(record.channels()) +
                        " channels over " + std::to_string(record.length) + " rows");
  }
  const std::size_t n = record.length, channels = record.channels();
  Tensor dv(upstream.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const IndexBuffer& perm = record.perms[c];
    if (!is_bijection(perm, n)) {
      throw ContractError("slice_sort_backward: channel " + std::to_string(c) +
                          " is not a bijection");
    }
    for (std::size_t r = 0; r < n; ++r) dv.at(perm[r], c) += upstream.at(r, c);
  }
  return dv;
}

Tensor extract_permutation_matrix(const PermutationRecord& record, std::size_t channel) {
  if (channel >= record.channels()) {
    throw IndexError("extract_permutation_matrix: channel " + std::to_string(channel) +
                     " out of range for " + std::to_string(record.channels()) + " channels");
  }
  const std::size_t n = record.length;
  Tensor p({n, n});
  for (std::size_t r = 0; r < n; ++r) p.at(r, record.perms[channel][r]) = 1.0;
  return p;
}

Tensor softmax_attention_map(const Tensor& q, const Tensor& k) {
  if (q.rank() != 2 || k.rank() != 2 || q.cols() != k.cols() || q.rows() != k.rows()) {
    throw DimensionError("softmax_attention_map: shapes " + shape_to_string(q.shape()) + " and " +
                         shape_to_string(k.shape()) + " do not agree");
  }
  const std::size_t n = q.rows(), d = q.cols();
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor p({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < d; ++t) acc += q.at(i, t) * k.at(j, t);
      p.at(i, j) = acc * s;
    }
    softmax_inplace(p.data().subspan(i * n, n));
  }
  return p;
}

MhaParams MhaParams::random(std::size_t input_dim, std::size_t heads, std::size_t head_dim,
                            Rng& rng) {
  MhaParams p;
  p.input_dim = input_dim;
  p.heads = heads;
  p.head_dim = head_dim;
  for (std::size_t m = 0; m < heads; ++m) {
    p.w_q.push_back(init_weight(input_dim, head_dim, rng));
    p.w_k.push_back(init_weight(input_dim, head_dim, rng));
    p.w_v.push_back(init_weight(input_dim, head_dim, rng));
  }
  p.w_o = init_weight(heads * head_dim, heads * head_dim, rng);
  return p;
}

std::size_t MhaParams::count() const {
  std::size_t total = w_o.size();
  for (std::size_t m = 0; m < heads; ++m) total += w_q[m].size() + w_k[m].size() + w_v[m].size();
  return total;
}

std::vector<std::pair<std::string, Tensor*>> MhaParams::named(const std::string& prefix) {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t m = 0; m < heads; ++m) {
    const std::string h = prefix + "head" + std::to_string(m) + ".";
    out.emplace_back(h + "w_q", &w_q[m]);
    out.emplace_back(h + "w_k", &w_k[m]);
    out.emplace_back(h + "w_v", &w_v[m]);
  }
  out.emplace_back(prefix + "w_o", &w_o);
  return out;
}

SliceSortParams SliceSortParams::random(std::size_t input_dim, std::size_t heads,
                                        std::size_t head_dim, bool output_projection, Rng& rng) {
  SliceSortParams p;
  p.input_dim = input_dim;
  p.heads = heads;
  p.head_dim = head_dim;
  p.w_v = init_weight(input_dim, heads * head_dim, rng);
  if (output_projection) p.w_o = init_weight(heads * head_dim, heads * head_dim, rng);
  return p;
}

std::size_t SliceSortParams::count() const { return w_v.size() + (w_o ? w_o->size() : 0); }

std::vector<std::pair<std::string, Tensor*>> SliceSortParams::named(const std::string& prefix) {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back(prefix + "w_v", &w_v);
  if (w_o) out.emplace_back(prefix + "w_o", &*w_o);
  return out;
}

Var mha_forward(Var x, MhaParams& params) {
  const Tensor& X = x.value();
  if (X.rank() != 2 || X.cols() != params.input_dim) {
    throw DimensionError("mha_forward: input " + shape_to_string(X.shape()) +
                         " does not match input_dim " + std::to_string(params.input_dim));
  }
  if (X.rows() == 0) throw ContractError("mha_forward: need at least one row");
  Graph& g = x.graph();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.head_dim));
  std::vector<Var> heads;
  heads.reserve(params.heads);
  for (std::size_t m = 0; m < params.heads; ++m) {
    Var q = matmul(x, g.param(params.w_q[m]));
    Var k = matmul(x, g.param(params.w_k[m]));
    Var v = matmul(x, g.param(params.w_v[m]));
    Var scores = matmul(scale(q, inv_sqrt_d), transpose(k));
    heads.push_back(matmul(softmax_rows(scores), v));
  }
  Var concat = heads.size() == 1 ? heads[0] : concat_cols(heads);
  return matmul(concat, g.param(params.w_o));
}

std::pair<Var, std::shared_ptr<const PermutationRecord>> sort_columns(Var v,
                                                                       const SortStrategy& strategy) {
  SortedColumns result = sort_columns(v.value(), strategy);
  auto record = std::make_shared<const PermutationRecord>(std::move(result.record));
  const std::size_t iv = v.id();
  Var out = v.graph().record(std::move(result.sorted), {iv}, [iv, record](Graph& g, std::size_t self) {
    const Tensor upstream(g.value(self).shape(), g.grad(self));
    const Tensor dv = slice_sort_backward(upstream, *record);
    std::span<double> acc = g.grad_for(iv);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += dv[i];
  });
  return {out, std::move(record)};
}

SliceSortOutput slice_sort_forward(Var x, SliceSortParams& params, const SortStrategy& strategy) {
  const Tensor& X = x.value();
  if (X.rank() != 2 || X.cols() != params.input_dim) {
    throw DimensionError("slice_sort_forward: input " + shape_to_string(X.shape()) +
                         " does not match input_dim " + std::to_string(params.input_dim));
  }
  if (params.w_v.rank() != 2 || params.w_v.cols() != params.output_dim()) {
    throw DimensionError("slice_sort_forward: W_V " + shape_to_string(params.w_v.shape()) +
                         " must have " + std::to_string(params.output_dim()) + " columns");
  }
  Graph& g = x.graph();
  Var v = matmul(x, g.param(params.w_v));
  auto [sorted, record] = sort_columns(v, strategy);
  Var out = params.w_o ? matmul(sorted, g.param(*params.w_o)) : sorted;
  return {out, sorted, std::move(record)};
}

}  // namespace sf

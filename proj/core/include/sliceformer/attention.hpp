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

#ifndef SLICEFORMER_ATTENTION_HPP_
#define SLICEFORMER_ATTENTION_HPP_

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sliceformer/autodiff.hpp"
#include "sliceformer/rng.hpp"
#include "sliceformer/tensor.hpp"

namespace sf {

enum class SortOrder { kAscending, kDescending };

enum class SortVariant { kAscending, kOrderInterleave, kMaxExchange };

std::string to_string(SortVariant variant);

// How each channel of the value matrix is reordered. For order-interleave,
// `layer` is the 1-based layer index n and `total_layers` is L.
struct SortStrategy {
  SortVariant variant = SortVariant::kAscending;
  std::size_t layer = 1;
  std::size_t total_layers = 1;

  static SortStrategy ascending() { return {}; }
  static SortStrategy interleave(std::size_t layer, std::size_t total_layers) {
    return {SortVariant::kOrderInterleave, layer, total_layers};
  }
  static SortStrategy max_exchange() { return {SortVariant::kMaxExchange, 1, 1}; }

  // Throws ContractError unless 1 <= layer <= total_layers (interleave only).
  void validate() const;
};

// Sort order of channel i (1-based) in layer n of L for `channels` = MD
// channels: ascending iff sin(2^(L-n) * pi * i / MD) >= 0. The sign is
// decided with exact integer arithmetic on the phase, so multiples of pi
// land on the ascending branch instead of on a rounding artifact.
SortOrder sort_direction(std::size_t channel, std::size_t layer, std::size_t total_layers,
                         std::size_t channels);

struct MaxExchangeResult {
  std::vector<double> column;
  // Gather order: column[r] = v[perm[r]].
  std::vector<std::size_t> perm;
};

// Swaps the first maximum (lowest index among ties) into position 0.
MaxExchangeResult max_exchange(std::span<const double> v);

// Per-channel gather orders of one slice-sort pass: sorted[r][i] =
// v[perms[i][r]][i]. Equivalently perms[i] encodes the permutation matrix
// P_i with P_i[r][perms[i][r]] = 1.
struct PermutationRecord {
  std::size_t length = 0;
  std::vector<IndexBuffer> perms;

  std::size_t channels() const { return perms.size(); }
  bool is_valid() const;
};

struct SortedColumns {
  Tensor sorted;
  PermutationRecord record;
};

// Reorders every column of `v` [N x C] per the strategy. Ties keep their
// original relative order. Nothing of size N x N is allocated.
SortedColumns sort_columns(const Tensor& v, const SortStrategy& strategy);

// Scatters each upstream column through the inverse of its permutation.
// Throws ContractError if the record does not match or is not a bijection.
Tensor slice_sort_backward(const Tensor& upstream, const PermutationRecord& record);

// Dense N x N matrix of one channel's permutation. Analysis only.
Tensor extract_permutation_matrix(const PermutationRecord& record, std::size_t channel);

// Softmax attention map softmax(q k^T / sqrt(D)) for q, k of shape [N x D].
Tensor softmax_attention_map(const Tensor& q, const Tensor& k);

struct MhaParams {
  std::size_t input_dim = 0;
  std::size_t heads = 0;
  std::size_t head_dim = 0;
  std::vector<Tensor> w_q, w_k, w_v;  // per head, [input_dim x head_dim]
  Tensor w_o;                         // [heads*head_dim x heads*head_dim]

  static MhaParams random(std::size_t input_dim, std::size_t heads, std::size_t head_dim, Rng& rng);
  std::size_t output_dim() const { return heads * head_dim; }
  std::size_t count() const;
  std::vector<std::pair<std::string, Tensor*>> named(const std::string& prefix);
};

struct SliceSortParams {
  std::size_t input_dim = 0;
  std::size_t heads = 0;
  std::size_t head_dim = 0;
  Tensor w_v;                 // [input_dim x heads*head_dim]
  std::optional<Tensor> w_o;  // [heads*head_dim x heads*head_dim] when projecting

  static SliceSortParams random(std::size_t input_dim, std::size_t heads, std::size_t head_dim,
                                bool output_projection, Rng& rng);
  std::size_t output_dim() const { return heads * head_dim; }
  std::size_t count() const;
  std::vector<std::pair<std::string, Tensor*>> named(const std::string& prefix);
};

// Softmax multi-head attention: per head softmax(Q K^T / sqrt(D)) V, heads
// concatenated column-wise, then multiplied by W_O. Returns [N x M*D].
Var mha_forward(Var x, MhaParams& params);

struct SliceSortOutput {
  Var output;  // after W_O when the projection is enabled
  Var sorted;  // the reordered value block, before W_O
  std::shared_ptr<const PermutationRecord> record;
};

// Differentiable column reorder of `v`; backward is slice_sort_backward.
std::pair<Var, std::shared_ptr<const PermutationRecord>> sort_columns(Var v,
                                                                       const SortStrategy& strategy);

// V = X W_V, each column reordered per strategy, then optionally W_O.
SliceSortOutput slice_sort_forward(Var x, SliceSortParams& params, const SortStrategy& strategy);

}  // namespace sf

#endif  // SLICEFORMER_ATTENTION_HPP_

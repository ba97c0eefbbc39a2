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

#ifndef SLICEFORMER_ENCODER_HPP_
#define SLICEFORMER_ENCODER_HPP_

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sliceformer/attention.hpp"
#include "sliceformer/autodiff.hpp"
#include "sliceformer/rng.hpp"

namespace sf {

enum class AttentionKind { kSoftmaxMha, kSliceSort };

std::string to_string(AttentionKind kind);

// Token id prepended to every sequence and the row it occupies.
inline constexpr std::size_t kClsToken = 0;
inline constexpr std::size_t kClsIndex = 0;

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t d_model = 32;
  std::size_t heads = 2;
  std::size_t head_dim = 16;
  std::size_t ffn_mult = 2;
  std::size_t vocab = 8;
  std::size_t seq_len = 64;  // includes the CLS slot
  std::size_t n_classes = 4;
  AttentionKind attention = AttentionKind::kSliceSort;
  SortVariant strategy = SortVariant::kAscending;
  bool use_output_projection = true;
  bool positional_encoding = true;
  double ln_eps = 1e-5;

  // Throws ContractError on inconsistent fields.
  void validate() const;
  // Sort strategy for 1-based layer n.
  SortStrategy strategy_for_layer(std::size_t layer) const;
};

using NamedTensor = std::pair<std::string, Tensor*>;

struct LayerParams {
  Tensor ln1_gamma, ln1_beta;
  std::variant<MhaParams, SliceSortParams> attention;
  Tensor ln2_gamma, ln2_beta;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

struct EncoderParams {
  Tensor embedding;  // [vocab x d_model]
  std::vector<LayerParams> layers;
  Tensor classifier_w;  // [d_model x n_classes]
  Tensor classifier_b;  // [n_classes]
  // Fixed positional table [seq_len x d_model]; not trained, not counted.
  Tensor positional;

  static EncoderParams init(const EncoderConfig& config, Rng& rng);

  // Every trainable tensor with a stable dotted name.
  std::vector<NamedTensor> named();
  void zero_grad();
};

// Sinusoidal table: channel 2k holds sin(p / 10000^(2k/d)) and channel 2k+1
// the matching cosine. d_model must be even.
Tensor sinusoidal_pe(std::size_t seq_len, std::size_t d_model);

// Per-call diagnostics filled by encoder_block_forward / model_forward.
struct ForwardTrace {
  std::vector<Var> attention_outputs;  // one per layer, [N x d_model]
  std::vector<std::shared_ptr<const PermutationRecord>> records;  // slice-sort layers only
  std::vector<Var> sorted_values;  // slice-sort layers only, before W_O
  std::size_t readout_row = static_cast<std::size_t>(-1);
};

// Pre-norm residual block: y = x + Attn(LN(x)); out = y + FFN(LN(y)).
// `layer` is 1-based and selects the interleave phase.
Var encoder_block_forward(Var x, LayerParams& params, const EncoderConfig& config,
                          std::size_t layer, ForwardTrace* trace = nullptr);

// `ids` holds seq_len - 1 tokens; CLS is prepended. Returns logits of shape
// [n_classes] read from the CLS row of the final residual stream.
Var model_forward(Graph& graph, std::span<const std::size_t> ids, EncoderParams& params,
                  const EncoderConfig& config, ForwardTrace* trace = nullptr);

std::size_t count_params(const EncoderParams& params);

}  // namespace sf

#endif  // SLICEFORMER_ENCODER_HPP_

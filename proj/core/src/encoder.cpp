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

#include "sliceformer/encoder.hpp"

#include <cmath>

#include "sliceformer/errors.hpp"
#include "sliceformer/ops.hpp"

namespace sf {
namespace {

Tensor ones(std::size_t n) {
  Tensor t({n});
  for (double& v : t.data()) v = 1.0;
  return t;
}

Tensor init_weight(std::size_t rows, std::size_t cols, Rng& rng) {
  return random_normal({rows, cols}, rng, 1.0 / std::sqrt(static_cast<double>(rows)));
}

}  // namespace

std::string to_string(AttentionKind kind) {
  return kind == AttentionKind::kSoftmaxMha ? "softmax" : "slicesort";
}

void EncoderConfig::validate() const {
  auto fail = [](const std::string& what) { throw ContractError("EncoderConfig: " + what); };
  if (heads * head_dim != d_model) {
    fail("heads * head_dim (" + std::to_string(heads * head_dim) + ") must equal d_model (" +
         std::to_string(d_model) + ")");
  }
  if (d_model == 0 || d_model % 2 != 0) fail("d_model must be positive and even");
  if (seq_len < 2) fail("seq_len must be at least 2 (CLS plus one token)");
  if (vocab < 1) fail("vocab must be positive");
  if (n_classes < 1) fail("n_classes must be positive");
  if (ffn_mult < 1) fail("ffn_mult must be positive");
  if (!(ln_eps > 0.0)) fail("ln_eps must be positive");
}

SortStrategy EncoderConfig::strategy_for_layer(std::size_t layer) const {
  switch (strategy) {
    case SortVariant::kAscending:
      return SortStrategy::ascending();
    case SortVariant::kOrderInterleave:
      return SortStrategy::interleave(layer, layers);
    case SortVariant::kMaxExchange:
      return SortStrategy::max_exchange();
  }
  return SortStrategy::ascending();
}

EncoderParams EncoderParams::init(const EncoderConfig& config, Rng& rng) {
  config.validate();
  const std::size_t d = config.d_model, hidden = config.ffn_mult * config.d_model;
  EncoderParams p;
  p.embedding = random_normal({config.vocab, d}, rng, 1.0);
  for (std::size_t l = 0; l < config.layers; ++l) {
    LayerParams layer{
        ones(d),
        Tensor({d}),
        config.attention == AttentionKind::kSoftmaxMha
            ? std::variant<MhaParams, SliceSortParams>(
                  MhaParams::random(d, config.heads, config.head_dim, rng))
            : std::variant<MhaParams, SliceSortParams>(SliceSortParams::random(
                  d, config.heads, config.head_dim, config.use_output_projection, rng)),
        ones(d),
        Tensor({d}),
        init_weight(d, hidden, rng),
        Tensor({hidden}),
        init_weight(hidden, d, rng),
        Tensor({d})};
    p.layers.push_back(std::move(layer));
  }
  p.classifier_w = init_weight(d, config.n_classes, rng);
  p.classifier_b = Tensor({config.n_classes});
  p.positional = config.positional_encoding ? sinusoidal_pe(config.seq_len, d)
                                            : Tensor({config.seq_len, d});
  return p;
}

std::vector<NamedTensor> EncoderParams::named() {
  std::vector<NamedTensor> out;
  out.emplace_back("embedding", &embedding);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LayerParams& lp = layers[l];
    const std::string pre = "layer" + std::to_string(l + 1) + ".";
    out.emplace_back(pre + "ln1.gamma", &lp.ln1_gamma);
    out.emplace_back(pre + "ln1.beta", &lp.ln1_beta);
    auto attn = std::visit([&](auto& a) { return a.named(pre + "attn."); }, lp.attention);
    out.insert(out.end(), attn.begin(), attn.end());
    out.emplace_back(pre + "ln2.gamma", &lp.ln2_gamma);
    out.emplace_back(pre + "ln2.beta", &lp.ln2_beta);
    out.emplace_back(pre + "ffn.w1", &lp.ffn_w1);
    out.emplace_back(pre + "ffn.b1", &lp.ffn_b1);
    out.emplace_back(pre + "ffn.w2", &lp.ffn_w2);
    out.emplace_back(pre + "ffn.b2", &lp.ffn_b2);
  }
  out.emplace_back("classifier.w", &classifier_w);
  out.emplace_back("classifier.b", &classifier_b);
  return out;
}

void EncoderParams::zero_grad() {
  for (auto& [name, t] : named()) t->zero_grad();
}

Tensor sinusoidal_pe(std::size_t seq_len, std::size_t d_model) {
  if (d_model % 2 != 0) {
    throw ContractError("sinusoidal_pe: d_model must be even, got " + std::to_string(d_model));
  }
  Tensor pe({seq_len, d_model});
  for (std::size_t p = 0; p < seq_len; ++p) {
    for (std::size_t k = 0; k < d_model / 2; ++k) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(2 * k) / static_cast<double>(d_model));
      const double angle = static_cast<double>(p) * freq;
      pe.at(p, 2 * k) = std::sin(angle);
      pe.at(p, 2 * k + 1) = std::cos(angle);
    }
  }
  return pe;
}

Var encoder_block_forward(Var x, LayerParams& params, const EncoderConfig& config,
                          std::size_t layer, ForwardTrace* trace) {
  const Tensor& X = x.value();
  if (X.rank() != 2 || X.cols() != config.d_model) {
    throw DimensionError("encoder_block_forward: input " + shape_to_string(X.shape()) +
                         " does not match d_model " + std::to_string(config.d_model));
  }
  Graph& g = x.graph();
  Var h = layer_norm(x, g.param(params.ln1_gamma), g.param(params.ln1_beta), config.ln_eps);
  Var attn;
  if (auto* mha = std::get_if<MhaParams>(&params.attention)) {
    attn = mha_forward(h, *mha);
  } else {
    SliceSortOutput s = slice_sort_forward(h, std::get<SliceSortParams>(params.attention),
                                           config.strategy_for_layer(layer));
    attn = s.output;
    if (trace != nullptr) {
      trace->records.push_back(s.record);
      trace->sorted_values.push_back(s.sorted);
    }
  }
  if (trace != nullptr) trace->attention_outputs.push_back(attn);
  Var y = add(x, attn);

  Var h2 = layer_norm(y, g.param(params.ln2_gamma), g.param(params.ln2_beta), config.ln_eps);
  Var f = gelu(add_bias(matmul(h2, g.param(params.ffn_w1)), g.param(params.ffn_b1)));
  f = add_bias(matmul(f, g.param(params.ffn_w2)), g.param(params.ffn_b2));
  return add(y, f);
}

Var model_forward(Graph& graph, std::span<const std::size_t> ids, EncoderParams& params,
                  const EncoderConfig& config, ForwardTrace* trace) {
  if (ids.size() + 1 != config.seq_len) {
    throw DimensionError("model_forward: expected " + std::to_string(config.seq_len - 1) +
                         " tokens, got " + std::to_string(ids.size()));
  }
  std::vector<std::size_t> tokens;
  tokens.reserve(config.seq_len);
  tokens.push_back(kClsToken);
  tokens.insert(tokens.end(), ids.begin(), ids.end());

  Var x = embedding_lookup(graph.param(params.embedding), tokens);
  if (config.positional_encoding) x = add(x, graph.constant(params.positional.detached()));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    x = encoder_block_forward(x, params.layers[l], config, l + 1, trace);
  }
  // Readout uses the fixed residual row, never a sorted position.
  Var cls = reshape(select_row(x, kClsIndex), {1, config.d_model});
  if (trace != nullptr) trace->readout_row = kClsIndex;
  Var logits = add_bias(matmul(cls, graph.param(params.classifier_w)),
                        graph.param(params.classifier_b));
  return reshape(logits, {config.n_classes});
}

std::size_t count_params(const EncoderParams& params) {
  std::size_t total = params.embedding.size() + params.classifier_w.size() +
                      params.classifier_b.size();
  for (const LayerParams& lp : params.layers) {
    total += lp.ln1_gamma.size() + lp.ln1_beta.size() + lp.ln2_gamma.size() + lp.ln2_beta.size();
    total += lp.ffn_w1.size() + lp.ffn_b1.size() + lp.ffn_w2.size() + lp.ffn_b2.size();
    total += std::visit([](const auto& a) { return a.count(); }, lp.attention);
  }
  return total;
}

}  // namespace sf

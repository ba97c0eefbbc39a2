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

#include "sliceformer/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "sliceformer/errors.hpp"
#include "sliceformer/ops.hpp"

namespace sf {

void adam_step(std::span<const NamedTensor> params, AdamState& state) {
  for (const auto& [name, t] : params) {
    for (double g : t->grad()) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in " + name);
    }
  }
  if (state.first_.size() != params.size()) {
    state.first_.assign(params.size(), Buffer());
    state.second_.assign(params.size(), Buffer());
  }
  ++state.step_;
  const AdamConfig& c = state.config_;
  const double t = static_cast<double>(state.step_);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k].second;
    std::span<const double> g = p.grad();
    Buffer& m = state.first_[k];
    Buffer& v = state.second_[k];
    if (m.size() != p.size()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    std::span<double> w = p.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      w[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

double clip_grad_norm(std::span<const NamedTensor> params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, t] : params)
    for (double g : t->grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (const auto& [name, t] : params)
      for (double& g : t->grad()) g *= factor;
  }
  return norm;
}

std::size_t predict(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < logits.size(); ++j) {
    if (logits[j] > logits[best]) best = j;
  }
  return best;
}

double evaluate(EncoderParams& params, const EncoderConfig& config, const Dataset& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const LabeledSequence& s : data) {
    Graph g(GradMode::kDisabled);
    Var logits = model_forward(g, s.tokens, params, config);
    if (predict(logits.value().data()) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainLog train_loop(const EncoderConfig& config, EncoderParams& params, const Dataset& train,
                    const Dataset* test, const TrainOptions& options) {
  TrainLog log;
  if (options.epochs == 0) return log;
  config.validate();

  const std::vector<NamedTensor> named = params.named();
  AdamState adam(options.adam);
  BatchIterator batches(train, options.batch_size, options.seed);

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    batches.start_epoch(epoch);
    double loss_total = 0.0;
    std::size_t seen = 0, correct = 0;
    while (auto batch = batches.next()) {
      params.zero_grad();
      Graph g;
      std::vector<Var> rows;
      std::vector<std::size_t> targets;
      for (const LabeledSequence* s : batch->samples) {
        Var logits = model_forward(g, s->tokens, params, config);
        if (predict(logits.value().data()) == s->label) ++correct;
        rows.push_back(logits);
        targets.push_back(s->label);
      }
      Var loss = cross_entropy(stack_rows(rows), targets);
      backward(loss);
      clip_grad_norm(named, options.clip_norm);
      adam_step(named, adam);
      loss_total += loss.value().item() * static_cast<double>(batch->size());
      seen += batch->size();
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = loss_total / static_cast<double>(seen);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    rec.test_acc = test != nullptr ? evaluate(params, config, *test)
                                   : std::numeric_limits<double>::quiet_NaN();
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.push_back(rec);
    if (test != nullptr && options.target_test_accuracy > 0.0 &&
        rec.test_acc >= options.target_test_accuracy) {
      break;
    }
  }
  params.zero_grad();
  return log;
}

}  // namespace sf

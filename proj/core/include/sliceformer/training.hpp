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

#ifndef SLICEFORMER_TRAINING_HPP_
#define SLICEFORMER_TRAINING_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sliceformer/data.hpp"
#include "sliceformer/encoder.hpp"

namespace sf {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  std::size_t step() const { return step_; }

 private:
  friend void adam_step(std::span<const NamedTensor> params, AdamState& state);

  AdamConfig config_;
  std::size_t step_ = 0;
  std::vector<Buffer> first_, second_;
};

// One bias-corrected Adam update using each tensor's accumulated gradient.
// Throws NumericError naming the first parameter with a non-finite gradient;
// nothing is updated in that case.
void adam_step(std::span<const NamedTensor> params, AdamState& state);

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(std::span<const NamedTensor> params, double max_norm);

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  AdamConfig adam;
  double clip_norm = 1.0;  // <= 0 disables clipping
  // Stop after the first epoch whose test accuracy reaches this value.
  // Ignored when <= 0 or when no test set is given.
  double target_test_accuracy = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean training loss over the epoch
  double train_acc = 0.0;
  double test_acc = 0.0;  // NaN without a test set
  double seconds = 0.0;
};

using TrainLog = std::vector<EpochRecord>;

TrainLog train_loop(const EncoderConfig& config, EncoderParams& params, const Dataset& train,
                    const Dataset* test, const TrainOptions& options);

// Index of the largest logit; the lowest index wins ties.
std::size_t predict(std::span<const double> logits);

// Fraction of samples whose predicted class equals the label. Runs without
// recording gradients and leaves `params` untouched.
double evaluate(EncoderParams& params, const EncoderConfig& config, const Dataset& data);

}  // namespace sf

#endif  // SLICEFORMER_TRAINING_HPP_

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

#ifndef SLICEFORMER_TOOLS_RUN_CONFIG_HPP_
#define SLICEFORMER_TOOLS_RUN_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sliceformer/encoder.hpp"
#include "sliceformer/training.hpp"

namespace sf::cli {

// Bad command line or config file. Maps to exit status 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Command { kTrain, kBench, kSmoothing, kSpectrum, kGradcheck };
enum class Task { kMajority, kListops, kIdx };

std::string to_string(Command command);
std::string to_string(Task task);

struct RunConfig {
  Command command = Command::kTrain;
  Task task = Task::kMajority;
  EncoderConfig encoder;
  AdamConfig adam;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double target_accuracy = 0.0;
  std::size_t train_samples = 500;
  std::size_t test_samples = 200;
  std::size_t listops_depth = 3;
  std::filesystem::path idx_train_images, idx_train_labels, idx_test_images, idx_test_labels;
  std::size_t idx_limit = 0;
  std::filesystem::path out_dir = ".";

  std::vector<std::size_t> bench_sizes = {256, 512, 1024, 2048, 4096, 8192};
  std::size_t bench_input_dim = 16;
  std::size_t bench_heads = 1;
  std::size_t bench_head_dim = 16;
  std::size_t bench_repeats = 3;

  std::vector<std::size_t> smoothing_sizes = {10, 100, 1000, 10000, 100000, 1000000};
  std::size_t smoothing_trials = 100;

  std::size_t probe_samples = 16;
  std::size_t gradcheck_seeds = 10;
};

// Every key accepted in a config file or as --key=value, sorted.
const std::vector<std::string>& valid_keys();

// Sets one key. Throws ConfigError for unknown keys (suggesting the closest
// valid one) and unparseable values.
void set_key(RunConfig& config, std::string_view key, std::string_view value);

// Applies `key = value` entries from config-file text. Several entries may
// share a line; '#' starts a comment.
void apply_config_text(RunConfig& config, std::string_view text);

// argv without the program name: `<command> [--config FILE] [--key=value]...`.
// File entries are applied first, flags after them.
RunConfig parse_config(const std::vector<std::string>& args);

// Throws ConfigError if a key the chosen command and task need is missing.
void check_required(const RunConfig& config);

std::string usage_text();

}  // namespace sf::cli

#endif  // SLICEFORMER_TOOLS_RUN_CONFIG_HPP_

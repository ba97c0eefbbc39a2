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

#ifndef SLICEFORMER_TOOLS_DISPATCH_HPP_
#define SLICEFORMER_TOOLS_DISPATCH_HPP_

#include <ostream>
#include <string>
#include <vector>

#include "cli/run_config.hpp"
#include "sliceformer/data.hpp"
#include "sliceformer/encoder.hpp"

namespace sf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

struct TaskData {
  EncoderConfig encoder;  // vocabulary, classes and length adjusted to the task
  Dataset train;
  Dataset test;
};

// Builds the datasets named by config.task and the encoder shape they need.
TaskData load_task(const RunConfig& config);

// Runs one command, writing artifacts under config.out_dir. Returns an exit
// status; runtime failures propagate as exceptions.
int dispatch(const RunConfig& config, std::ostream& out);

// parse_config + dispatch with errors mapped to exit statuses.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sf::cli

#endif  // SLICEFORMER_TOOLS_DISPATCH_HPP_

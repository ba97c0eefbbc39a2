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

#ifndef SLICEFORMER_DATA_HPP_
#define SLICEFORMER_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sliceformer/rng.hpp"

namespace sf {

struct LabeledSequence {
  std::vector<std::size_t> tokens;
  std::size_t label = 0;

  bool operator==(const LabeledSequence&) const = default;
};

using Dataset = std::vector<LabeledSequence>;

// Sequences of `seq_len` tokens drawn from 1..vocab-1 (id 0 is the CLS
// token) with one planted token occurring strictly more often than any
// other. label = that token mod n_classes. The planted class is drawn
// uniformly, so labels are balanced in expectation.
Dataset gen_multiset_majority(std::uint64_t seed, std::size_t n_samples, std::size_t seq_len,
                              std::size_t vocab, std::size_t n_classes);

// ListOps-lite vocabulary. Ids start after the CLS token.
namespace listops {
inline constexpr std::size_t kPad = 1;
inline constexpr std::size_t kDigit0 = 2;  // digits 0..9 -> 2..11
inline constexpr std::size_t kMax = 12;
inline constexpr std::size_t kMin = 13;
inline constexpr std::size_t kMed = 14;
inline constexpr std::size_t kOpen = 15;
inline constexpr std::size_t kClose = 16;
inline constexpr std::size_t kVocab = 17;
inline constexpr std::size_t kClasses = 10;

// Tokenizes text such as "[MAX 2 [MIN 5 3] 9]".
std::vector<std::size_t> tokenize(std::string_view text);
std::string detokenize(std::span<const std::size_t> tokens);
// Evaluates a (possibly front-padded) token sequence. MED takes the upper
// middle of the sorted arguments. Throws FormatError on malformed input.
std::size_t evaluate(std::span<const std::size_t> tokens);
}  // namespace listops

// Nested MAX/MIN/MED prefix expressions of depth <= max_depth, front-padded
// to exactly max_len tokens. Requires max_depth <= 3 and max_len <= 64.
Dataset gen_listops_lite(std::uint64_t seed, std::size_t n_samples, std::size_t max_depth,
                         std::size_t max_len);

// Raw contents of an unsigned-byte IDX file.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> values;
};

// Parses the big-endian IDX layout. Only the unsigned-byte element type
// (0x08) is accepted. Throws FormatError naming the observed magic.
IdxArray read_idx(const std::filesystem::path& path);

// Image file (magic 0x00000803) plus label file (0x00000801). Each image is
// flattened row-major; a pixel byte is its own token id (256-token vocab).
// `limit` of 0 loads everything.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t limit = 0);

struct Batch {
  std::vector<const LabeledSequence*> samples;
  std::size_t size() const { return samples.size(); }
};

// Seeded per-epoch shuffle; the last short batch is emitted as-is.
class BatchIterator {
 public:
  BatchIterator(const Dataset& data, std::size_t batch_size, std::uint64_t seed);

  // Next batch of the current epoch, or nullopt at the end of the epoch.
  std::optional<Batch> next();
  // Reshuffles and rewinds. Epoch e's order depends only on (seed, e).
  void start_epoch(std::size_t epoch);
  std::size_t batches_per_epoch() const;

 private:
  const Dataset* data_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace sf

#endif  // SLICEFORMER_DATA_HPP_
